//! Phase points on the collision cross section, the time-reversal
//! involution, cone-field bounds, homogeneity strips, and the invariant
//! measure (sampling, masses, and the flow identity for the mean return
//! time).
//!
//! The base section `M` consists of the gray-arc collisions together with
//! the clean transparent crossings; the extended section adds the white
//! disk collisions. A phase point stores the wall label, the arclength
//! coordinate, and the clockwise angle `phi` from the inward normal, so
//! the natural invariant measure is `cos(phi) dr dphi` up to normalization.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Centering, Table, Wall, V2};

/// Strips with index below this threshold collapse into strip 0.
pub const DEFAULT_STRIP_CUTOFF: u32 = 10;

/// A point of the (extended) cross section in wall coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub wall: Wall,
    /// Arclength along the wall, in `[0, wall_len]`.
    pub r: f64,
    /// Clockwise angle from the inward normal, in `(-pi/2, pi/2)`.
    pub phi: f64,
}

/// How a phase point sits inside the extended cross section.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SectionClass {
    /// Collision with a gray arc; in the base section.
    GraySolid,
    /// Clean transparent crossing; in the base section.
    CleanTransparent,
    /// Collision with the white disk; extended section only.
    WhiteSolid,
}

impl SectionClass {
    pub fn in_base_section(self) -> bool {
        !matches!(self, SectionClass::WhiteSolid)
    }
}

impl PhasePoint {
    pub fn new(wall: Wall, r: f64, phi: f64) -> Self {
        PhasePoint { wall, r, phi }
    }

    /// Plane position and unit velocity of the outgoing ray.
    pub fn embed(&self, table: &Table, c: &Centering) -> (V2, V2) {
        let frame = table.frame(self.wall, self.r, c);
        (frame.point, frame.direction(self.phi))
    }

    /// Validate coordinates and classify the point within the extended
    /// section. Transparent points must be clean crossings.
    pub fn classify(&self, table: &Table, c: &Centering) -> Result<SectionClass> {
        let len = table.wall_len(self.wall);
        if !(0.0..=len).contains(&self.r) || !self.r.is_finite() {
            return Err(Error::OutsideSection(format!(
                "arclength {} outside [0, {len}] on wall {}",
                self.r,
                self.wall.index()
            )));
        }
        if !(self.phi.abs() < std::f64::consts::FRAC_PI_2) {
            return Err(Error::OutsideSection(format!(
                "angle {} is not strictly inside (-pi/2, pi/2)",
                self.phi
            )));
        }
        match self.wall {
            Wall::Star => Ok(SectionClass::WhiteSolid),
            w if w.is_solid() => Ok(SectionClass::GraySolid),
            _ => {
                let (q, v) = self.embed(table, c);
                if table.is_clean_pass(q, v) {
                    Ok(SectionClass::CleanTransparent)
                } else {
                    Err(Error::OutsideSection(
                        "transparent crossing is not clean".into(),
                    ))
                }
            }
        }
    }

    pub fn in_base_section(&self, table: &Table, c: &Centering) -> bool {
        self.classify(table, c)
            .map(|class| class.in_base_section())
            .unwrap_or(false)
    }

    /// Time-reversal involution on the section: solid points flip the
    /// angle in place; transparent crossings move to the identified wall
    /// with mirrored arclength and the same angle, which embeds to the
    /// same torus point with reversed velocity.
    pub fn involution(&self, table: &Table) -> PhasePoint {
        if self.wall.is_solid() {
            PhasePoint::new(self.wall, self.r, -self.phi)
        } else {
            let partner = self.wall.partner().expect("transparent wall has a partner");
            PhasePoint::new(partner, table.wall_len(self.wall) - self.r, self.phi)
        }
    }

    /// Slope interval `[a, b]` of the unstable cone `{a <= dphi/dr <= b}`
    /// at this point. Solid walls use their own curvature for the lower
    /// slope; transparent walls use the uniform floor that survives the
    /// longest flight.
    pub fn unstable_cone(&self, table: &Table) -> (f64, f64) {
        match self.wall {
            Wall::Star => (
                table.kappa_white(),
                table.kappa_white() + self.phi.cos() / table.tau_min,
            ),
            w if w.is_solid() => (
                table.kappa_gray(),
                table.kappa_gray() + self.phi.cos() / table.tau_min,
            ),
            _ => (table.a_transparent(), self.phi.cos() / table.tau_min),
        }
    }

    /// Slope interval of the stable cone, the involution image of the
    /// unstable cone at the reversed point. The derivative of the
    /// involution is `diag(1, -1)` on solid walls and `diag(-1, 1)` on
    /// transparent walls; both negate slopes.
    pub fn stable_cone(&self, table: &Table) -> (f64, f64) {
        let (a, b) = self.involution(table).unstable_cone(table);
        (-b, -a)
    }

    /// Homogeneity strip index: zero in the bulk, `+/- k` with
    /// `k = floor((pi/2 - |phi|)^(-1/2)) >= cutoff` approaching grazing.
    pub fn strip_index(&self, cutoff: u32) -> i64 {
        strip_index(self.phi, cutoff)
    }
}

/// Homogeneity strip index of an angle. See [`PhasePoint::strip_index`].
pub fn strip_index(phi: f64, cutoff: u32) -> i64 {
    let gap = std::f64::consts::FRAC_PI_2 - phi.abs();
    let k = if gap <= 0.0 {
        i64::MAX
    } else {
        let raw = gap.powf(-0.5).floor();
        if raw >= i64::MAX as f64 {
            i64::MAX
        } else {
            raw as i64
        }
    };
    if k < cutoff as i64 {
        0
    } else if phi >= 0.0 {
        k
    } else {
        -k
    }
}

/// Masses of the `cos(phi) dr dphi` measure on the section components.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MeasureMasses {
    /// Mass of the four gray arcs: `4 pi rbar`.
    pub gray: f64,
    /// Mass of the clean transparent crossings on the four sides.
    pub transparent: f64,
    /// Mass of the white disk boundary: `4 pi r` (extended section only).
    pub white: f64,
    /// Mass of the base section.
    pub base: f64,
    /// Mass of the extended section.
    pub extended: f64,
}

/// Section masses. The transparent mass has a closed form: on one side the
/// clean angles satisfy `cos(phi) > rbar / min(x, 1 - x)`, and integrating
/// `2 sin(phi_max(x))` gives `4 rbar (tan(u) - u)` with `u = acos(2 rbar)`.
pub fn measure_masses(table: &Table) -> MeasureMasses {
    let rbar = table.rbar();
    let u = (2.0 * rbar).acos();
    let per_side = 4.0 * rbar * (u.tan() - u);
    let gray = 4.0 * std::f64::consts::PI * rbar;
    let white = 4.0 * std::f64::consts::PI * table.r();
    let transparent = 4.0 * per_side;
    MeasureMasses {
        gray,
        transparent,
        white,
        base: gray + transparent,
        extended: gray + transparent + white,
    }
}

/// Mean return time to the base section predicted by the flow identity:
/// `2 pi |Q| / nu(M)` with `|Q|` the area of the table.
pub fn mean_return_time_flow_identity(table: &Table) -> f64 {
    let area = 1.0
        - std::f64::consts::PI * (table.rbar() * table.rbar() + table.r() * table.r());
    2.0 * std::f64::consts::PI * area / measure_masses(table).base
}

/// Draw a point of the base section distributed by the normalized invariant
/// measure: walls weighted by length, arclength uniform, angle by the exact
/// inverse law `phi = asin(2u - 1)`, rejecting non-clean transparent
/// crossings.
pub fn sample_mu<R: Rng + ?Sized>(
    table: &Table,
    c: &Centering,
    rng: &mut R,
) -> PhasePoint {
    let lengths: Vec<f64> = Wall::ALL_FIXED
        .iter()
        .map(|&w| table.wall_len(w))
        .collect();
    let total: f64 = lengths.iter().sum();
    loop {
        let mut pick = rng.gen::<f64>() * total;
        let mut wall = Wall::W1;
        for (&w, &len) in Wall::ALL_FIXED.iter().zip(&lengths) {
            if pick < len {
                wall = w;
                break;
            }
            pick -= len;
            wall = w;
        }
        let r = rng.gen::<f64>() * table.wall_len(wall);
        let phi = (2.0 * rng.gen::<f64>() - 1.0).asin();
        let x = PhasePoint::new(wall, r, phi);
        if matches!(
            x.classify(table, c),
            Ok(SectionClass::GraySolid) | Ok(SectionClass::CleanTransparent)
        ) {
            return x;
        }
    }
}
