//! Table geometry: admissibility of the scatterer configuration, wall charts
//! for the cross section, the clean-pass predicate, and the derived constants
//! every other module leans on.
//!
//! The billiard table is the unit 2-torus minus two disks: the gray disk of
//! radius `rbar` centered at the lattice corner and the white disk of radius
//! `r` centered within `eps` of the torus center. In the fundamental square
//! the gray disk shows up as four quarter disks at the corners. Walls are
//! labeled `W1..W8`: odd walls are the gray quarter arcs (W1 at corner (0,0),
//! then counterclockwise by corner), even walls are the free segments of the
//! square sides (W2 bottom, W4 right, W6 top, W8 left). `Star` is the white
//! disk boundary, parametrized about its own center so the chart does not
//! move with the centering. On every wall the arclength coordinate runs left
//! to right when facing the inward normal, and `phi` is the clockwise angle
//! from that normal, so the outgoing direction is `sin(phi) t + cos(phi) n`.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Plane vector alias used throughout the crate.
pub type V2 = Vector2<f64>;

/// Tolerance for deciding that a plane point lies on a wall.
pub const ON_WALL_TOL: f64 = 1e-9;

/// Margin below which a trajectory is treated as singular and rejected.
pub const SINGULARITY_TOL: f64 = 1e-9;

/// Two candidate events closer than this along a ray count as a tie
/// (a corner-grade singularity), not as an ordered pair.
pub const EVENT_TIE_TOL: f64 = 1e-12;

/// Raw scatterer parameters before validation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableConfig {
    /// Radius of the gray disk at the lattice corner.
    pub rbar: f64,
    /// Radius of the white disk near the torus center.
    pub r: f64,
    /// Largest allowed norm of the white disk's center offset.
    pub eps: f64,
}

impl TableConfig {
    pub fn new(rbar: f64, r: f64, eps: f64) -> Self {
        TableConfig { rbar, r, eps }
    }
}

/// Offset of the white disk center from the torus center `(1/2, 1/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Centering {
    pub x: f64,
    pub y: f64,
}

impl Centering {
    pub const ZERO: Centering = Centering { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Centering { x, y }
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// Distance from the square center to the region swept by chords that run
/// from a transparent wall to the gray disk at the end of the same wall.
/// The white disk must stay strictly inside this radius; the expression is
/// the distance to the extremal tangent chord.
pub fn free_zone_bound(rbar: f64) -> f64 {
    let u = 1.0 - 2.0 * rbar;
    (u.sqrt() - rbar * u) / (2.0 * (1.0 - rbar))
}

/// Wall labels of the extended cross section.
///
/// Odd labels are the solid gray arcs, even labels the transparent sides,
/// `Star` the white disk boundary (not part of the base section).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Wall {
    W1,
    W2,
    W3,
    W4,
    W5,
    W6,
    W7,
    W8,
    Star,
}

impl Wall {
    pub const ALL_FIXED: [Wall; 8] = [
        Wall::W1,
        Wall::W2,
        Wall::W3,
        Wall::W4,
        Wall::W5,
        Wall::W6,
        Wall::W7,
        Wall::W8,
    ];

    /// 1-based label; `Star` reports 9.
    pub fn index(self) -> usize {
        match self {
            Wall::W1 => 1,
            Wall::W2 => 2,
            Wall::W3 => 3,
            Wall::W4 => 4,
            Wall::W5 => 5,
            Wall::W6 => 6,
            Wall::W7 => 7,
            Wall::W8 => 8,
            Wall::Star => 9,
        }
    }

    pub fn from_index(i: usize) -> Option<Wall> {
        Wall::ALL_FIXED.get(i.wrapping_sub(1)).copied().or(if i == 9 {
            Some(Wall::Star)
        } else {
            None
        })
    }

    /// Solid walls reflect; this includes the white disk boundary.
    pub fn is_solid(self) -> bool {
        matches!(
            self,
            Wall::W1 | Wall::W3 | Wall::W5 | Wall::W7 | Wall::Star
        )
    }

    pub fn is_transparent(self) -> bool {
        !self.is_solid()
    }

    /// Whether points on this wall belong to the base cross section.
    pub fn in_base_section(self) -> bool {
        self != Wall::Star
    }

    /// The identified opposite side of a transparent wall.
    pub fn partner(self) -> Option<Wall> {
        match self {
            Wall::W2 => Some(Wall::W6),
            Wall::W6 => Some(Wall::W2),
            Wall::W4 => Some(Wall::W8),
            Wall::W8 => Some(Wall::W4),
            _ => None,
        }
    }

    /// Center of the corner disk owning a gray arc, in square coordinates.
    pub fn arc_corner(self) -> Option<V2> {
        match self {
            Wall::W1 => Some(V2::new(0.0, 0.0)),
            Wall::W3 => Some(V2::new(1.0, 0.0)),
            Wall::W5 => Some(V2::new(1.0, 1.0)),
            Wall::W7 => Some(V2::new(0.0, 1.0)),
            _ => None,
        }
    }

    /// Largest polar angle of a gray arc about its corner; the arc spans
    /// the quarter circle below it and the chart runs clockwise from there.
    pub(crate) fn arc_theta_hi(self) -> f64 {
        use std::f64::consts::FRAC_PI_2;
        match self {
            Wall::W1 => FRAC_PI_2,
            Wall::W3 => 2.0 * FRAC_PI_2,
            Wall::W5 => 3.0 * FRAC_PI_2,
            Wall::W7 => 4.0 * FRAC_PI_2,
            _ => unreachable!("not an arc wall"),
        }
    }
}

/// Position, inward normal, tangent of increasing arclength, and curvature
/// at a wall point. `tangent` is the normal rotated clockwise by a quarter
/// turn, so `(tangent, normal)` is a right-handed frame.
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    pub point: V2,
    pub tangent: V2,
    pub normal: V2,
    pub kappa: f64,
}

impl Frame {
    /// Unit direction at clockwise angle `phi` from the inward normal.
    pub fn direction(&self, phi: f64) -> V2 {
        self.tangent * phi.sin() + self.normal * phi.cos()
    }
}

/// A validated table: the parameter triple plus every derived constant the
/// dynamics and statistics layers need. Construct via [`Table::build`]
/// (or the [`validate_table`] alias).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Table {
    pub config: TableConfig,
    /// Free-zone bound `L(rbar)`.
    pub free_zone: f64,
    /// Infimum of `cos(phi)` over the transparent part of the section,
    /// found numerically on the bottom wall (the four sides agree by
    /// symmetry).
    pub d_min_cosine: f64,
    /// Certified lower bound for every straight leg between extended
    /// returns: the smallest gap between the two disks over admissible
    /// centerings.
    pub tau_min: f64,
    /// Certified upper bound for leg lengths; generous but sufficient for
    /// the cone-slope bounds.
    pub tau_max: f64,
}

/// Validate a parameter triple and derive the table constants.
pub fn validate_table(config: TableConfig) -> Result<Table> {
    Table::build(config)
}

/// One admissibility condition evaluated on a parameter triple.
/// `slack` is the distance to the boundary, nonnegative exactly when the
/// condition holds (NaN when the inputs are not comparable).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConditionCheck {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
    pub slack: f64,
}

impl Table {
    /// Evaluate every admissibility condition as a `{name, lhs, rhs,
    /// pass, slack}` row, without short-circuiting on the first failure.
    /// Valid tables produce exactly the five inequality rows; nonpositive
    /// or non-finite parameters prepend a failing `positivity` row.
    pub fn condition_report(config: TableConfig) -> Vec<ConditionCheck> {
        let TableConfig { rbar, r, eps } = config;
        let mut rows = Vec::with_capacity(6);
        let positive = rbar > 0.0
            && r > 0.0
            && eps >= 0.0
            && rbar.is_finite()
            && r.is_finite()
            && eps.is_finite();
        if !positive {
            rows.push(ConditionCheck {
                name: "positivity",
                lhs: rbar.min(r).min(eps),
                rhs: 0.0,
                pass: false,
                slack: f64::NAN,
            });
        }
        let diag = std::f64::consts::FRAC_1_SQRT_2;
        // Upper bounds: lhs < rhs, slack = rhs - lhs.
        let upper = |name, lhs: f64, rhs: f64| ConditionCheck {
            name,
            lhs,
            rhs,
            pass: lhs < rhs,
            slack: rhs - lhs,
        };
        // Lower bounds: lhs >= rhs, slack = lhs - rhs.
        let lower = |name, lhs: f64, rhs: f64| ConditionCheck {
            name,
            lhs,
            rhs,
            pass: lhs >= rhs,
            slack: lhs - rhs,
        };
        rows.push(upper("no overlap (half width)", rbar.max(r + eps), 0.5));
        rows.push(upper("no overlap (diagonal)", rbar + r + eps, diag));
        rows.push(lower("finite horizon (corner disk size)", rbar, 0.5 * diag));
        rows.push(lower("finite horizon (channel blocking)", rbar + r - eps, 0.5));
        rows.push(upper("free zone", r + eps, free_zone_bound(rbar)));
        rows
    }

    pub fn build(config: TableConfig) -> Result<Table> {
        let TableConfig { rbar, r, eps } = config;
        let fail = |condition: &'static str, detail: String| {
            Err(Error::InvalidTable { condition, detail })
        };
        if !(rbar > 0.0 && r > 0.0 && eps >= 0.0)
            || !(rbar.is_finite() && r.is_finite() && eps.is_finite())
        {
            return fail(
                "positivity",
                format!("need rbar > 0, r > 0, eps >= 0; got ({rbar}, {r}, {eps})"),
            );
        }
        if !(rbar.max(r + eps) < 0.5) {
            return fail(
                "no overlap (half width)",
                format!("max(rbar, r + eps) = {} must stay below 1/2", rbar.max(r + eps)),
            );
        }
        let diag = std::f64::consts::FRAC_1_SQRT_2;
        if !(rbar + r + eps < diag) {
            return fail(
                "no overlap (diagonal)",
                format!("rbar + r + eps = {} must stay below 1/sqrt(2)", rbar + r + eps),
            );
        }
        let corner_min = 0.5 * diag; // 1/(2 sqrt 2)
        if !(rbar >= corner_min) {
            return fail(
                "finite horizon (corner disk size)",
                format!("rbar = {rbar} must be at least 1/(2 sqrt 2) = {corner_min}"),
            );
        }
        if !(rbar + r - eps >= 0.5) {
            return fail(
                "finite horizon (channel blocking)",
                format!("rbar + r - eps = {} must be at least 1/2", rbar + r - eps),
            );
        }
        let free_zone = free_zone_bound(rbar);
        if !(r + eps < free_zone) {
            return fail(
                "free zone",
                format!("r + eps = {} must stay below L(rbar) = {free_zone}", r + eps),
            );
        }

        // Smallest center-to-center distance between white and gray images is
        // sqrt(1/2) - eps, attained toward a corner; all other leg types are
        // longer than the resulting gap.
        let tau_min = diag - eps - rbar - r;
        let tau_max = 5.0;

        let mut table = Table {
            config,
            free_zone,
            d_min_cosine: f64::NAN,
            tau_min,
            tau_max,
        };
        table.d_min_cosine = table.compute_d();
        Ok(table)
    }

    /// Install a tighter certified leg-length bracket (for instance after an
    /// independent analysis). The bracket must contain every leg length for
    /// the cone bounds to stay valid, so this only accepts a widening of
    /// nothing: `lo <= tau_min`, `hi >= observed` responsibilities are the
    /// caller's.
    pub fn with_leg_bounds(mut self, tau_min: f64, tau_max: f64) -> Self {
        self.tau_min = tau_min;
        self.tau_max = tau_max;
        self
    }

    pub fn rbar(&self) -> f64 {
        self.config.rbar
    }

    pub fn r(&self) -> f64 {
        self.config.r
    }

    pub fn eps(&self) -> f64 {
        self.config.eps
    }

    /// Certified lower bound on a single flight leg.
    pub fn tau_min(&self) -> f64 {
        self.tau_min
    }

    /// Upper bound on a single flight leg used by the cone slopes.
    pub fn tau_max(&self) -> f64 {
        self.tau_max
    }

    pub fn kappa_gray(&self) -> f64 {
        1.0 / self.config.rbar
    }

    pub fn kappa_white(&self) -> f64 {
        1.0 / self.config.r
    }

    pub fn kappa_min(&self) -> f64 {
        self.kappa_gray().min(self.kappa_white())
    }

    /// Lower cone slope on transparent walls.
    pub fn a_transparent(&self) -> f64 {
        self.d_min_cosine / (self.tau_max + 1.0 / self.kappa_min())
    }

    /// Smallest lower cone slope over the whole extended section.
    pub fn a_min(&self) -> f64 {
        self.a_transparent()
            .min(self.kappa_gray())
            .min(self.kappa_white())
    }

    /// Largest upper cone slope over the whole extended section.
    pub fn b_max(&self) -> f64 {
        self.kappa_gray().max(self.kappa_white()) + 1.0 / self.tau_min
    }

    /// Uniform per-leg expansion factor in the p-metric.
    pub fn lambda(&self) -> f64 {
        1.0 + self.tau_min * self.a_min()
    }

    /// Constant in the n-step Euclidean expansion bound `C lambda^n`.
    pub fn expansion_constant(&self) -> f64 {
        let b = self.b_max();
        let a = self.a_min();
        (self.tau_min * a / (1.0 + b * b).sqrt()) * (1.0 + a * a).sqrt() / self.lambda()
    }

    pub fn check_centering(&self, c: &Centering) -> Result<()> {
        let norm = c.norm();
        if norm <= self.config.eps {
            Ok(())
        } else {
            Err(Error::InvalidCentering {
                norm,
                eps: self.config.eps,
            })
        }
    }

    /// Center of the white disk in the fundamental square.
    pub fn white_center(&self, c: &Centering) -> V2 {
        V2::new(0.5 + c.x, 0.5 + c.y)
    }

    pub fn wall_len(&self, wall: Wall) -> f64 {
        use std::f64::consts::{FRAC_PI_2, TAU};
        match wall {
            Wall::W1 | Wall::W3 | Wall::W5 | Wall::W7 => FRAC_PI_2 * self.config.rbar,
            Wall::W2 | Wall::W4 | Wall::W6 | Wall::W8 => 1.0 - 2.0 * self.config.rbar,
            Wall::Star => TAU * self.config.r,
        }
    }

    /// Chart of a wall point. The centering is only consulted for `Star`.
    pub fn frame(&self, wall: Wall, r: f64, c: &Centering) -> Frame {
        let rbar = self.config.rbar;
        match wall {
            Wall::W1 | Wall::W3 | Wall::W5 | Wall::W7 => {
                let theta = wall.arc_theta_hi() - r / rbar;
                let n = V2::new(theta.cos(), theta.sin());
                Frame {
                    point: wall.arc_corner().unwrap() + n * rbar,
                    tangent: V2::new(n.y, -n.x),
                    normal: n,
                    kappa: 1.0 / rbar,
                }
            }
            Wall::W2 => Frame {
                point: V2::new(rbar + r, 0.0),
                tangent: V2::new(1.0, 0.0),
                normal: V2::new(0.0, 1.0),
                kappa: 0.0,
            },
            Wall::W4 => Frame {
                point: V2::new(1.0, rbar + r),
                tangent: V2::new(0.0, 1.0),
                normal: V2::new(-1.0, 0.0),
                kappa: 0.0,
            },
            Wall::W6 => Frame {
                point: V2::new(1.0 - rbar - r, 1.0),
                tangent: V2::new(-1.0, 0.0),
                normal: V2::new(0.0, -1.0),
                kappa: 0.0,
            },
            Wall::W8 => Frame {
                point: V2::new(0.0, 1.0 - rbar - r),
                tangent: V2::new(0.0, -1.0),
                normal: V2::new(1.0, 0.0),
                kappa: 0.0,
            },
            Wall::Star => {
                let rw = self.config.r;
                let theta = -r / rw;
                let n = V2::new(theta.cos(), theta.sin());
                Frame {
                    point: self.white_center(c) + n * rw,
                    tangent: V2::new(n.y, -n.x),
                    normal: n,
                    kappa: 1.0 / rw,
                }
            }
        }
    }

    /// Inverse chart on the eight fixed walls, with tolerance
    /// [`ON_WALL_TOL`]. Points matching several walls (side points, which
    /// carry both crossing directions, and wall corners) canonicalize to the
    /// lowest label. Returns `None` off every wall.
    pub fn locate(&self, point: V2) -> Option<(Wall, f64)> {
        let rbar = self.config.rbar;
        let p = V2::new(point.x.rem_euclid(1.0), point.y.rem_euclid(1.0));
        let mut hits: Vec<(Wall, f64)> = Vec::new();
        for wall in [Wall::W1, Wall::W3, Wall::W5, Wall::W7] {
            let corner = wall.arc_corner().unwrap();
            // The corner disk is seen from inside the square across up to
            // four lattice copies of the point; the in-square arc is the one
            // whose polar angle lies in the wall's quadrant.
            for dx in [-1.0, 0.0, 1.0] {
                for dy in [-1.0, 0.0, 1.0] {
                    let q = p + V2::new(dx, dy);
                    let w = q - corner;
                    if (w.norm() - rbar).abs() > ON_WALL_TOL {
                        continue;
                    }
                    let theta_hi = wall.arc_theta_hi();
                    let mut theta = w.y.atan2(w.x);
                    if theta < 0.0 {
                        theta += std::f64::consts::TAU;
                    }
                    let r = rbar * (theta_hi - theta);
                    let len = self.wall_len(wall);
                    if (-ON_WALL_TOL..=len + ON_WALL_TOL).contains(&r) {
                        hits.push((wall, r.clamp(0.0, len)));
                    }
                }
            }
        }
        let len = 1.0 - 2.0 * rbar;
        let side = |r: f64| (-ON_WALL_TOL..=len + ON_WALL_TOL).contains(&r);
        if p.y.min(1.0 - p.y) <= ON_WALL_TOL {
            let r2 = p.x - rbar;
            if side(r2) {
                hits.push((Wall::W2, r2.clamp(0.0, len)));
                hits.push((Wall::W6, (len - r2).clamp(0.0, len)));
            }
        }
        if p.x.min(1.0 - p.x) <= ON_WALL_TOL {
            let r4 = p.y - rbar;
            if side(r4) {
                hits.push((Wall::W4, r4.clamp(0.0, len)));
                hits.push((Wall::W8, (len - r4).clamp(0.0, len)));
            }
        }
        hits.into_iter().min_by_key(|(w, _)| w.index())
    }

    /// Signed clearance between the unit segment centered at `q` with
    /// direction `v` and the gray disk images: positive iff the pass is
    /// clean. `q` must lie in the fundamental square.
    pub fn clean_pass_margin(&self, q: V2, v: V2) -> f64 {
        let mut margin = f64::INFINITY;
        for i in -1..=2 {
            for j in -1..=2 {
                let center = V2::new(i as f64, j as f64);
                let dist = segment_disk_distance(q, v, 0.5, center, self.config.rbar);
                margin = margin.min(dist);
            }
        }
        margin
    }

    /// Clean-pass predicate: strict positivity of the segment clearance.
    pub fn is_clean_pass(&self, q: V2, v: V2) -> bool {
        self.clean_pass_margin(q, v) > 0.0
    }

    /// Infimum of `cos(phi)` over the clean region of the bottom wall,
    /// located by a coarse scan of the widest clean angle followed by a
    /// ternary refinement around the worst abscissa.
    fn compute_d(&self) -> f64 {
        let rbar = self.config.rbar;
        let widest = |x: f64| -> f64 {
            let q = V2::new(x, 0.0);
            if self.clean_pass_margin(q, V2::new(0.0, 1.0)) <= 0.0 {
                return 0.0;
            }
            let (mut lo, mut hi) = (0.0f64, std::f64::consts::FRAC_PI_2);
            for _ in 0..70 {
                let mid = 0.5 * (lo + hi);
                let v = V2::new(mid.sin(), mid.cos());
                if self.clean_pass_margin(q, v) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        let (mut best_x, mut best) = (0.5, 0.0f64);
        let n = 512;
        for k in 0..=n {
            let x = rbar + (1.0 - 2.0 * rbar) * k as f64 / n as f64;
            let w = widest(x);
            if w > best {
                best = w;
                best_x = x;
            }
        }
        let h = (1.0 - 2.0 * rbar) / n as f64;
        let (mut lo, mut hi) = (best_x - h, best_x + h);
        for _ in 0..70 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if widest(m1) < widest(m2) {
                lo = m1;
            } else {
                hi = m2;
            }
        }
        widest(0.5 * (lo + hi)).max(best).cos()
    }
}

/// Distance from the segment `q + t v`, `|t| <= half`, to the disk of radius
/// `radius` centered at `center` (negative when the segment enters the disk).
pub fn segment_disk_distance(q: V2, v: V2, half: f64, center: V2, radius: f64) -> f64 {
    let h = half.max(0.0);
    let w = q - center;
    let t = (-w.dot(&v)).clamp(-h, h);
    ((w + v * t).norm()) - radius
}
