//! The return map: exact orbit tracing between cross-section events,
//! tangent (derivative) maps along orbits, time reversal, separation
//! times, and observed flight-length ranges.
//!
//! A leg runs from one extended-section event to the next. The tracer
//! marches cell by cell in the fundamental square: inside one cell only
//! the four corner quarter disks, the white disk, and the four sides can
//! interrupt the ray. Non-clean side crossings are not events; the ray
//! folds through them and the leg continues. Every leg reports the
//! smallest singularity margin it encountered (grazing incidence, wall
//! corners, the clean boundary, and near misses of disks), and the step
//! functions refuse to continue when a margin drops below
//! [`SINGULARITY_TOL`](crate::geometry::SINGULARITY_TOL), because past
//! that point floating-point orbits are meaningless.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    Centering, Table, Wall, EVENT_TIE_TOL, SINGULARITY_TOL, V2,
};
use crate::phase::PhasePoint;

/// Upper bound on folds within one leg; exceeding it means the finite
/// horizon failed, which is a bug for an admissible table.
pub const MAX_FOLDS_PER_LEG: u32 = 64;

/// Upper bound on extended legs within one base return.
pub const MAX_LEGS_PER_RETURN: u32 = 16;

/// One leg of the extended section map, with its derivative.
#[derive(Debug, Clone)]
pub struct LegStep {
    pub to: PhasePoint,
    /// Flight time of the leg (speed is one, so also its length).
    pub flight: f64,
    /// Displacement of the leg in the plane lift.
    pub displacement: V2,
    /// Non-clean side crossings folded through.
    pub folds: u32,
    /// Smallest singularity margin seen along the leg.
    pub margin: f64,
    /// Derivative of the leg in wall coordinates `(dr, dphi)`.
    pub matrix: Matrix2<f64>,
}

/// One application of the base-section return map.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReturnRecord {
    pub from: PhasePoint,
    pub to: PhasePoint,
    /// Total flight time of the return.
    pub time: f64,
    /// Plane-lift displacement of the return.
    pub displacement: [f64; 2],
    /// Number of extended legs composing the return.
    pub legs: u32,
    /// Total folds over all legs.
    pub folds: u32,
    /// White-disk collisions during the return.
    pub white_hits: u32,
    /// Smallest singularity margin over all legs.
    pub min_margin: f64,
    /// Shortest and longest individual leg.
    pub min_leg: f64,
    pub max_leg: f64,
}

#[derive(Clone, Copy)]
struct Circle {
    center: V2,
    radius: f64,
    /// Wall reached when this circle is hit (`None` marks corner circles
    /// by their owning arc wall via `wall`).
    wall: Wall,
}

enum CellEvent {
    /// Hit circle `idx` (the event time lives in the caller's tracker).
    Hit { idx: usize },
    /// Exit the cell through side `axis` (0 = x, 1 = y) in the positive
    /// or negative direction.
    Exit { axis: usize, positive: bool },
}

fn curvature(table: &Table, wall: Wall) -> f64 {
    match wall {
        Wall::Star => table.kappa_white(),
        w if w.is_solid() => table.kappa_gray(),
        _ => 0.0,
    }
}

/// First intersection time of the ray `q + t v` with a circle, ignoring
/// roots below the tie tolerance.
fn ray_circle(q: V2, v: V2, center: V2, radius: f64) -> Option<f64> {
    let w = q - center;
    let b = w.dot(&v);
    let c = w.norm_squared() - radius * radius;
    let disc = b * b - c;
    if disc <= 0.0 {
        return None;
    }
    let s = disc.sqrt();
    let t0 = -b - s;
    if t0 > EVENT_TIE_TOL {
        Some(t0)
    } else {
        let t1 = -b + s;
        (t1 > EVENT_TIE_TOL).then_some(t1)
    }
}

/// Derivative of one leg in wall coordinates. `kappa0`, `cos0` describe
/// the departure, `kappa1`, `cos1` the arrival, `tau` the flight length;
/// `solid_arrival` selects reflection versus pass-through.
fn leg_matrix(
    kappa0: f64,
    cos0: f64,
    tau: f64,
    kappa1: f64,
    cos1: f64,
    solid_arrival: bool,
) -> Matrix2<f64> {
    let a = (tau * kappa0 + cos0) / cos1;
    let b = tau / cos1;
    if solid_arrival {
        Matrix2::new(-a, -b, -kappa1 * a - kappa0, -kappa1 * b - 1.0)
    } else {
        Matrix2::new(a, b, kappa0, 1.0)
    }
}

struct MarginTracker {
    margin: f64,
    what: &'static str,
}

impl MarginTracker {
    fn new() -> Self {
        MarginTracker {
            margin: f64::INFINITY,
            what: "none",
        }
    }

    fn push(&mut self, margin: f64, what: &'static str) {
        if margin < self.margin {
            self.margin = margin;
            self.what = what;
        }
    }

    fn check(&self) -> Result<()> {
        if self.margin < SINGULARITY_TOL {
            Err(Error::SingularityProximity {
                what: self.what,
                margin: self.margin,
            })
        } else {
            Ok(())
        }
    }
}

/// Advance one step of the extended section map (solid collisions and
/// clean crossings both count as events). The input must be a valid
/// point of the extended section for the same centering.
pub fn step_extended(table: &Table, c: &Centering, from: &PhasePoint) -> Result<LegStep> {
    let len = table.wall_len(from.wall);
    if !(from.r >= 0.0 && from.r <= len)
        || !from.phi.is_finite()
        || from.phi.abs() >= std::f64::consts::FRAC_PI_2
    {
        return Err(Error::OutsideSection(format!(
            "phase point off the {:?} chart: r = {} (length {}), phi = {}",
            from.wall, from.r, len, from.phi
        )));
    }
    let rbar = table.rbar();
    let circles = [
        Circle { center: V2::new(0.0, 0.0), radius: rbar, wall: Wall::W1 },
        Circle { center: V2::new(1.0, 0.0), radius: rbar, wall: Wall::W3 },
        Circle { center: V2::new(1.0, 1.0), radius: rbar, wall: Wall::W5 },
        Circle { center: V2::new(0.0, 1.0), radius: rbar, wall: Wall::W7 },
        Circle { center: table.white_center(c), radius: table.r(), wall: Wall::Star },
    ];
    // Circle owning the departure point, excluded from hits and near-miss
    // checks on the first sub-segment (a ray leaving a convex disk cannot
    // return to it without folding first).
    let departure = match from.wall {
        Wall::W1 => Some(0),
        Wall::W3 => Some(1),
        Wall::W5 => Some(2),
        Wall::W7 => Some(3),
        Wall::Star => Some(4),
        _ => None,
    };

    let (mut q, v) = from.embed(table, c);
    let kappa0 = curvature(table, from.wall);
    let cos0 = from.phi.cos();
    let mut tracker = MarginTracker::new();
    let mut flight = 0.0f64;
    let mut folds = 0u32;

    loop {
        let exclude = if folds == 0 { departure } else { None };
        let mut best: Option<CellEvent> = None;
        let mut best_t = f64::INFINITY;
        let mut second_t = f64::INFINITY;
        let mut consider = |event: CellEvent, t: f64| {
            if t < best_t {
                second_t = best_t;
                best_t = t;
                best = Some(event);
            } else if t < second_t {
                second_t = t;
            }
        };
        for (idx, circle) in circles.iter().enumerate() {
            if Some(idx) == exclude {
                continue;
            }
            if let Some(t) = ray_circle(q, v, circle.center, circle.radius) {
                consider(CellEvent::Hit { idx }, t);
            }
        }
        for axis in 0..2 {
            let (pos, vel) = if axis == 0 { (q.x, v.x) } else { (q.y, v.y) };
            if vel > 0.0 {
                let t = (1.0 - pos) / vel;
                consider(CellEvent::Exit { axis, positive: true }, t);
            } else if vel < 0.0 {
                let t = -pos / vel;
                consider(CellEvent::Exit { axis, positive: false }, t);
            }
        }
        let event = best.ok_or_else(|| {
            Error::Internal("ray found no event in cell".into())
        })?;
        if second_t - best_t < EVENT_TIE_TOL {
            return Err(Error::SingularityProximity {
                what: "simultaneous events (wall corner)",
                margin: second_t - best_t,
            });
        }

        // Near misses: disks the sub-segment passes without hitting.
        let hit_idx = match &event {
            CellEvent::Hit { idx } => Some(*idx),
            _ => None,
        };
        let mid = q + v * (best_t * 0.5);
        for (idx, circle) in circles.iter().enumerate() {
            if Some(idx) == exclude || Some(idx) == hit_idx {
                continue;
            }
            let d = crate::geometry::segment_disk_distance(
                mid,
                v,
                best_t * 0.5,
                circle.center,
                circle.radius,
            );
            tracker.push(d, "near miss of a disk");
        }

        flight += best_t;
        if flight > table.tau_max {
            return Err(Error::Internal(format!(
                "leg length {flight} exceeds the certified bound {}",
                table.tau_max
            )));
        }
        let p = q + v * best_t;

        match event {
            CellEvent::Hit { idx } => {
                let circle = circles[idx];
                let w = p - circle.center;
                let n = w / circle.radius;
                let vpost = v - n * (2.0 * v.dot(&n));
                let tangent = V2::new(n.y, -n.x);
                let phi1 = (vpost.dot(&tangent)).atan2(vpost.dot(&n));
                tracker.push(
                    std::f64::consts::FRAC_PI_2 - phi1.abs(),
                    "grazing incidence",
                );
                let wall = circle.wall;
                let len = table.wall_len(wall);
                let r1 = if wall == Wall::Star {
                    let mut theta = w.y.atan2(w.x);
                    if theta < 0.0 {
                        theta += std::f64::consts::TAU;
                    }
                    (table.r() * (std::f64::consts::TAU - theta)).rem_euclid(len)
                } else {
                    let mut theta = w.y.atan2(w.x);
                    if theta < 0.0 {
                        theta += std::f64::consts::TAU;
                    }
                    let r = rbar * (wall.arc_theta_hi() - theta);
                    tracker.push(r.min(len - r), "wall corner");
                    r.clamp(0.0, len)
                };
                tracker.check()?;
                let cos1 = phi1.cos();
                let matrix = leg_matrix(
                    kappa0,
                    cos0,
                    flight,
                    curvature(table, wall),
                    cos1,
                    true,
                );
                return Ok(LegStep {
                    to: PhasePoint::new(wall, r1, phi1),
                    flight,
                    displacement: v * flight,
                    folds,
                    margin: tracker.margin,
                    matrix,
                });
            }
            CellEvent::Exit { axis, positive } => {
                // Pin the exit point to the boundary exactly.
                let mut pb = p;
                if axis == 0 {
                    pb.x = if positive { 1.0 } else { 0.0 };
                    pb.y = pb.y.clamp(0.0, 1.0);
                } else {
                    pb.y = if positive { 1.0 } else { 0.0 };
                    pb.x = pb.x.clamp(0.0, 1.0);
                }
                let clean = table.clean_pass_margin(pb, v);
                if clean.abs() <= SINGULARITY_TOL {
                    return Err(Error::SingularityProximity {
                        what: "crossing at the clean boundary",
                        margin: clean.abs(),
                    });
                }
                if clean < 0.0 {
                    // Fold through and continue the leg.
                    tracker.push(-clean, "nearly clean crossing");
                    tracker.check()?;
                    folds += 1;
                    if folds > MAX_FOLDS_PER_LEG {
                        return Err(Error::Internal(
                            "fold count exceeds the finite-horizon bound".into(),
                        ));
                    }
                    q = pb;
                    if axis == 0 {
                        q.x = if positive { 0.0 } else { 1.0 };
                    } else {
                        q.y = if positive { 0.0 } else { 1.0 };
                    }
                    continue;
                }
                // Clean crossing: a real event of the extended section.
                if from.wall.is_transparent() {
                    return Err(Error::Internal(
                        "two consecutive clean crossings; the predecessor of a \
                         clean crossing must be a solid collision"
                            .into(),
                    ));
                }
                tracker.push(clean, "barely clean crossing");
                let (wall, r1, sin1, cos1) = if axis == 1 && positive {
                    (Wall::W2, pb.x - rbar, v.x, v.y)
                } else if axis == 1 {
                    (Wall::W6, 1.0 - rbar - pb.x, -v.x, -v.y)
                } else if positive {
                    (Wall::W8, 1.0 - rbar - pb.y, -v.y, v.x)
                } else {
                    (Wall::W4, pb.y - rbar, v.y, -v.x)
                };
                let len = table.wall_len(wall);
                if !(-1e-9..=len + 1e-9).contains(&r1) {
                    return Err(Error::Internal(format!(
                        "crossing registered outside the wall chart: r = {r1}"
                    )));
                }
                tracker.push(r1.min(len - r1), "wall corner");
                let phi1 = sin1.atan2(cos1);
                tracker.push(
                    std::f64::consts::FRAC_PI_2 - phi1.abs(),
                    "grazing crossing",
                );
                tracker.check()?;
                let matrix = leg_matrix(kappa0, cos0, flight, 0.0, cos1, false);
                return Ok(LegStep {
                    to: PhasePoint::new(wall, r1.clamp(0.0, len), phi1),
                    flight,
                    displacement: v * flight,
                    folds,
                    margin: tracker.margin,
                    matrix,
                });
            }
        }
    }
}

fn step_inner(
    table: &Table,
    c: &Centering,
    from: &PhasePoint,
    mut tangent: Option<&mut Matrix2<f64>>,
) -> Result<ReturnRecord> {
    if from.wall == Wall::Star {
        return Err(Error::OutsideSection(
            "return map starts on the base section, not on the white disk".into(),
        ));
    }
    let mut cur = *from;
    let mut time = 0.0;
    let mut displacement = V2::zeros();
    let mut legs = 0u32;
    let mut folds = 0u32;
    let mut white_hits = 0u32;
    let mut min_margin = f64::INFINITY;
    let mut min_leg = f64::INFINITY;
    let mut max_leg = 0.0f64;
    loop {
        let leg = step_extended(table, c, &cur)?;
        legs += 1;
        time += leg.flight;
        displacement += leg.displacement;
        folds += leg.folds;
        min_margin = min_margin.min(leg.margin);
        min_leg = min_leg.min(leg.flight);
        max_leg = max_leg.max(leg.flight);
        if let Some(m) = tangent.as_deref_mut() {
            *m = leg.matrix * *m;
        }
        if leg.to.wall == Wall::Star {
            white_hits += 1;
            if legs >= MAX_LEGS_PER_RETURN {
                return Err(Error::Internal(
                    "leg count exceeds the per-return bound".into(),
                ));
            }
            cur = leg.to;
            continue;
        }
        return Ok(ReturnRecord {
            from: *from,
            to: leg.to,
            time,
            displacement: [displacement.x, displacement.y],
            legs,
            folds,
            white_hits,
            min_margin,
            min_leg,
            max_leg,
        });
    }
}

/// One application of the base-section return map.
pub fn step(table: &Table, c: &Centering, from: &PhasePoint) -> Result<ReturnRecord> {
    step_inner(table, c, from, None)
}

/// One return together with its derivative in wall coordinates.
pub fn step_with_tangent(
    table: &Table,
    c: &Centering,
    from: &PhasePoint,
) -> Result<(ReturnRecord, Matrix2<f64>)> {
    let mut m = Matrix2::identity();
    let record = step_inner(table, c, from, Some(&mut m))?;
    Ok((record, m))
}

/// The chain of extended legs composing one base return, kept leg by
/// leg (every leg but the last ends on the white disk).
pub fn return_legs(table: &Table, c: &Centering, from: &PhasePoint) -> Result<Vec<LegStep>> {
    if from.wall == Wall::Star {
        return Err(Error::OutsideSection(
            "return map starts on the base section, not on the white disk".into(),
        ));
    }
    let mut cur = *from;
    let mut legs = Vec::new();
    loop {
        let leg = step_extended(table, c, &cur)?;
        let done = leg.to.wall != Wall::Star;
        cur = leg.to;
        legs.push(leg);
        if done {
            return Ok(legs);
        }
        if legs.len() as u32 >= MAX_LEGS_PER_RETURN {
            return Err(Error::Internal(
                "leg count exceeds the per-return bound".into(),
            ));
        }
    }
}

/// One application of the inverse return map, computed through the time
/// reversal `F^{-1} = I F I`. The record describes the backward step:
/// `to` is the preimage of `from`.
pub fn inverse_step(table: &Table, c: &Centering, from: &PhasePoint) -> Result<ReturnRecord> {
    let reversed = from.involution(table);
    let rec = step_inner(table, c, &reversed, None)?;
    // The reversed point embeds at the same torus position with the
    // opposite velocity, so its forward orbit already traverses the
    // original return backward and its displacement needs no sign flip.
    Ok(ReturnRecord {
        from: *from,
        to: rec.to.involution(table),
        time: rec.time,
        displacement: rec.displacement,
        legs: rec.legs,
        folds: rec.folds,
        white_hits: rec.white_hits,
        min_margin: rec.min_margin,
        min_leg: rec.min_leg,
        max_leg: rec.max_leg,
    })
}

/// Orbit of the random composition: centering `centerings[k]` drives the
/// `k`-th return. Returns one record per centering.
pub fn orbit(
    table: &Table,
    centerings: &[Centering],
    from: &PhasePoint,
) -> Result<Vec<ReturnRecord>> {
    let mut records = Vec::with_capacity(centerings.len());
    let mut cur = *from;
    for c in centerings {
        let rec = step(table, c, &cur)?;
        cur = rec.to;
        records.push(rec);
    }
    Ok(records)
}

/// Orbit of the deterministic map with a fixed centering.
pub fn orbit_fixed(
    table: &Table,
    c: &Centering,
    from: &PhasePoint,
    n: usize,
) -> Result<Vec<ReturnRecord>> {
    let mut records = Vec::with_capacity(n);
    let mut cur = *from;
    for _ in 0..n {
        let rec = step(table, c, &cur)?;
        cur = rec.to;
        records.push(rec);
    }
    Ok(records)
}

/// Smallest singularity margin over the first `n` returns from `from`.
pub fn singularity_margin(
    table: &Table,
    c: &Centering,
    from: &PhasePoint,
    n: usize,
) -> Result<f64> {
    Ok(orbit_fixed(table, c, from, n)?
        .iter()
        .map(|r| r.min_margin)
        .fold(f64::INFINITY, f64::min))
}

/// Forward separation time of two points under the extended map with a
/// fixed centering: the number of initial extended steps whose iterates
/// share both the wall component and the homogeneity strip. Orbits that
/// die on a singularity stop counting there.
pub fn separation_time(
    table: &Table,
    c: &Centering,
    x: &PhasePoint,
    y: &PhasePoint,
    n_max: usize,
    strip_cutoff: u32,
) -> usize {
    let mut a = *x;
    let mut b = *y;
    for n in 0..n_max {
        if a.wall != b.wall || a.strip_index(strip_cutoff) != b.strip_index(strip_cutoff) {
            return n;
        }
        match (
            step_extended(table, c, &a),
            step_extended(table, c, &b),
        ) {
            (Ok(la), Ok(lb)) => {
                a = la.to;
                b = lb.to;
            }
            _ => return n + 1,
        }
    }
    n_max
}

/// Seminorm `cos(phi) |dr|` adapted to the expansion estimates; it is
/// positive on cone vectors, where `dr` never vanishes.
pub fn p_seminorm(phi: f64, tangent: &V2) -> f64 {
    phi.cos() * tangent.x.abs()
}

/// Observed range of extended-leg lengths over a Monte Carlo sweep:
/// `samples` initial points per centering, each traced for one return.
/// Returns `(shortest, longest)` over every leg seen.
/// Euclidean cocycle growth at one horizon: the worst observed ratio of
/// `|DF^n v|` against the certified floor `C Lambda^n |v|`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EuclideanGrowth {
    pub n: usize,
    /// `min |DF^n v| / (C Lambda^n |v|)` over the sampled orbits; the
    /// bound holds when this stays at or above one.
    pub min_ratio: f64,
}

/// Outcome of the uniform-hyperbolicity sweep.
#[derive(Debug, Clone, Serialize)]
pub struct HyperbolicityReport {
    pub centerings: usize,
    pub samples_per_centering: usize,
    /// Cone images tested (two boundary slopes and one interior slope
    /// per sampled return).
    pub cone_checks: usize,
    pub cone_violations: usize,
    /// Individual flight legs whose p-metric growth was measured.
    pub legs_checked: usize,
    /// Smallest per-leg p-metric expansion of an unstable-cone vector.
    pub min_leg_expansion: f64,
    pub lambda: f64,
    pub expansion_constant: f64,
    /// Worst n-step Euclidean growth ratios, n = 1..=n_max.
    pub euclidean: Vec<EuclideanGrowth>,
    /// Starts discarded for singularity proximity.
    pub discarded: usize,
    pub pass: bool,
}

/// Sweep cone invariance, per-leg p-metric expansion, and the n-step
/// Euclidean expansion floor over random starts and random admissible
/// centerings. The first centering is always the exactly centered one;
/// the rest are drawn uniformly from the admissible disk.
pub fn hyperbolicity_check(
    table: &Table,
    centerings: usize,
    samples_per_centering: usize,
    euclid_samples: usize,
    euclid_n_max: usize,
    seed: u64,
) -> HyperbolicityReport {
    use crate::phase::sample_mu;
    use rand::Rng;

    let lambda = table.lambda();
    let c_euclid = table.expansion_constant();
    let eps = table.eps();
    let draw_centering = |rng: &mut rand_chacha::ChaCha8Rng| {
        let radius = eps * rng.gen::<f64>().sqrt();
        let angle = std::f64::consts::TAU * rng.gen::<f64>();
        Centering::new(radius * angle.cos(), radius * angle.sin())
    };

    let mut cone_checks = 0usize;
    let mut cone_violations = 0usize;
    let mut legs_checked = 0usize;
    let mut min_leg_expansion = f64::INFINITY;
    let mut discarded = 0usize;

    for k in 0..centerings {
        let mut rng = crate::rng::stream_rng(seed, k as u64);
        let c = if k == 0 {
            Centering::ZERO
        } else {
            draw_centering(&mut rng)
        };
        let mut done = 0;
        while done < samples_per_centering {
            let x = sample_mu(table, &c, &mut rng);
            let legs = match return_legs(table, &c, &x) {
                Ok(l) => l,
                Err(Error::SingularityProximity { .. }) => {
                    discarded += 1;
                    continue;
                }
                Err(_) => {
                    discarded += 1;
                    continue;
                }
            };
            done += 1;
            let (a0, b0) = x.unstable_cone(table);
            let to = legs.last().expect("a return has at least one leg").to;
            let (a1, b1) = to.unstable_cone(table);
            let interior = a0 + (b0 - a0) * rng.gen::<f64>();
            for slope in [a0, b0, interior] {
                let mut v = V2::new(1.0, slope);
                let mut phi = x.phi;
                for leg in &legs {
                    let w = leg.matrix * v;
                    let grow = p_seminorm(leg.to.phi, &w) / p_seminorm(phi, &v);
                    min_leg_expansion = min_leg_expansion.min(grow);
                    legs_checked += 1;
                    v = w;
                    phi = leg.to.phi;
                }
                cone_checks += 1;
                let s = v.y / v.x;
                if !(s > a1 && s < b1) {
                    cone_violations += 1;
                }
            }
        }
    }

    // Euclidean n-step floor along fixed-centering orbits.
    let mut euclidean: Vec<EuclideanGrowth> = (1..=euclid_n_max)
        .map(|n| EuclideanGrowth {
            n,
            min_ratio: f64::INFINITY,
        })
        .collect();
    let mut rng = crate::rng::stream_rng(seed, centerings as u64);
    let mut done = 0;
    while done < euclid_samples {
        let c = if done == 0 {
            Centering::ZERO
        } else {
            draw_centering(&mut rng)
        };
        let x0 = sample_mu(table, &c, &mut rng);
        let (a0, b0) = x0.unstable_cone(table);
        let slope = a0 + (b0 - a0) * rng.gen::<f64>();
        let v0 = V2::new(1.0, slope).normalize();
        let mut v = v0;
        let mut x = x0;
        let mut ok = true;
        for item in euclidean.iter_mut() {
            match step_with_tangent(table, &c, &x) {
                Ok((rec, m)) => {
                    v = m * v;
                    x = rec.to;
                    let floor = c_euclid * lambda.powi(item.n as i32);
                    item.min_ratio = item.min_ratio.min(v.norm() / floor);
                }
                Err(_) => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            done += 1;
        } else {
            discarded += 1;
        }
    }

    let pass = cone_violations == 0
        && min_leg_expansion >= lambda - 1e-9
        && euclidean.iter().all(|e| e.min_ratio >= 1.0);
    HyperbolicityReport {
        centerings,
        samples_per_centering,
        cone_checks,
        cone_violations,
        legs_checked,
        min_leg_expansion,
        lambda,
        expansion_constant: c_euclid,
        euclidean,
        discarded,
        pass,
    }
}

pub fn observed_flight_range(
    table: &Table,
    centerings: &[Centering],
    samples: usize,
    seed: u64,
) -> (f64, f64) {
    use crate::phase::sample_mu;
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for (k, c) in centerings.iter().enumerate() {
        let mut rng = crate::rng::stream_rng(seed, k as u64);
        let mut done = 0;
        while done < samples {
            let x = sample_mu(table, c, &mut rng);
            match step(table, c, &x) {
                Ok(rec) => {
                    lo = lo.min(rec.min_leg);
                    hi = hi.max(rec.max_leg);
                    done += 1;
                }
                Err(Error::SingularityProximity { .. }) => continue,
                Err(_) => continue,
            }
        }
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{validate_table, TableConfig};
    use crate::phase::sample_mu;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn table() -> Table {
        validate_table(TableConfig::new(0.36, 0.20, 0.01)).unwrap()
    }

    fn centering() -> Centering {
        Centering::new(0.004, -0.006)
    }

    /// Draw a section point whose first return avoids singularities by a
    /// comfortable margin, for derivative and reversibility tests.
    fn comfortable_point(
        table: &Table,
        c: &Centering,
        rng: &mut impl Rng,
        margin: f64,
    ) -> (PhasePoint, ReturnRecord) {
        loop {
            let x = sample_mu(table, c, rng);
            if let Ok(rec) = step(table, c, &x) {
                if rec.min_margin > margin {
                    return (x, rec);
                }
            }
        }
    }

    #[test]
    fn displacement_is_consistent_with_embeddings() {
        let t = table();
        let c = centering();
        let mut rng = crate::rng::stream_rng(1, 0);
        for _ in 0..500 {
            let x = sample_mu(&t, &c, &mut rng);
            let Ok(rec) = step(&t, &c, &x) else { continue };
            let (q0, _) = x.embed(&t, &c);
            let (q1, _) = rec.to.embed(&t, &c);
            for k in 0..2 {
                let gap = q1[k] - q0[k] - rec.displacement[k];
                let wrapped = (gap - gap.round()).abs();
                assert!(wrapped < 1e-9, "lift mismatch {gap} at {x:?}");
            }
            assert!(rec.time >= t.tau_min - 1e-12);
            assert!(rec.min_leg >= t.tau_min - 1e-12, "leg {} too short", rec.min_leg);
            assert!(rec.max_leg <= t.tau_max);
        }
    }

    #[test]
    fn images_lie_in_the_base_section() {
        let t = table();
        let c = centering();
        let mut rng = crate::rng::stream_rng(2, 0);
        for _ in 0..500 {
            let x = sample_mu(&t, &c, &mut rng);
            let Ok(rec) = step(&t, &c, &x) else { continue };
            let class = rec.to.classify(&t, &c).unwrap();
            assert!(class.in_base_section());
        }
    }

    #[test]
    fn inverse_step_recovers_the_start() {
        let t = table();
        let c = centering();
        let mut rng = crate::rng::stream_rng(3, 0);
        for _ in 0..200 {
            let (x, rec) = comfortable_point(&t, &c, &mut rng, 1e-4);
            let back = inverse_step(&t, &c, &rec.to).unwrap();
            assert_eq!(back.to.wall, x.wall, "wall mismatch for {x:?}");
            assert_relative_eq!(back.to.r, x.r, epsilon = 1e-8);
            assert_relative_eq!(back.to.phi, x.phi, epsilon = 1e-8);
            assert_relative_eq!(back.time, rec.time, epsilon = 1e-9);
            assert_relative_eq!(
                back.displacement[0],
                -rec.displacement[0],
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn tangent_matrix_matches_finite_differences() {
        let t = table();
        let c = centering();
        let mut rng = crate::rng::stream_rng(4, 0);
        let mut tested = 0;
        while tested < 40 {
            let (x, _) = comfortable_point(&t, &c, &mut rng, 1e-3);
            let (rec, m) = step_with_tangent(&t, &c, &x).unwrap();
            let h = 1e-7;
            let mut fd = Matrix2::zeros();
            let mut ok = true;
            for (col, (dr, dphi)) in [(h, 0.0), (0.0, h)].into_iter().enumerate() {
                let xp = PhasePoint::new(x.wall, x.r + dr, x.phi + dphi);
                let xm = PhasePoint::new(x.wall, x.r - dr, x.phi - dphi);
                let (Ok(rp), Ok(rm)) = (step(&t, &c, &xp), step(&t, &c, &xm)) else {
                    ok = false;
                    break;
                };
                if rp.to.wall != rec.to.wall || rm.to.wall != rec.to.wall {
                    ok = false;
                    break;
                }
                fd[(0, col)] = (rp.to.r - rm.to.r) / (2.0 * h);
                fd[(1, col)] = (rp.to.phi - rm.to.phi) / (2.0 * h);
            }
            if !ok {
                continue;
            }
            tested += 1;
            for i in 0..2 {
                for j in 0..2 {
                    let scale = m[(i, j)].abs().max(1.0);
                    assert!(
                        (m[(i, j)] - fd[(i, j)]).abs() / scale < 5e-4,
                        "entry ({i},{j}): analytic {} vs fd {} at {x:?}",
                        m[(i, j)],
                        fd[(i, j)]
                    );
                }
            }
        }
    }

    #[test]
    fn tangent_determinant_telescopes_cosines() {
        let t = table();
        let c = centering();
        let mut rng = crate::rng::stream_rng(5, 0);
        for _ in 0..100 {
            let (x, _) = comfortable_point(&t, &c, &mut rng, 1e-5);
            let (rec, m) = step_with_tangent(&t, &c, &x).unwrap();
            let expected = x.phi.cos() / rec.to.phi.cos();
            let det = m.determinant();
            // The determinant telescopes through intermediate events, so
            // each full return preserves cos(phi) dr dphi exactly.
            assert_relative_eq!(det.abs(), expected, max_relative = 1e-9);
        }
    }

    #[test]
    fn mean_return_time_matches_the_flow_identity() {
        let t = table();
        let c = centering();
        let mut rng = crate::rng::stream_rng(6, 0);
        let n = 60_000;
        let mut sum = 0.0;
        let mut done = 0;
        while done < n {
            let x = sample_mu(&t, &c, &mut rng);
            let Ok(rec) = step(&t, &c, &x) else { continue };
            sum += rec.time;
            done += 1;
        }
        let mean = sum / n as f64;
        assert!(
            (mean - 0.5188262693017213).abs() < 5e-3,
            "mean return {mean}"
        );
    }

    #[test]
    fn pushforward_statistics_match_direct_sampling() {
        // One application of the return map should leave the sampling
        // measure invariant; compare summary statistics of the image
        // against an independent direct sample.
        let t = table();
        let c = centering();
        let n = 30_000;
        let stats = |points: &mut dyn Iterator<Item = PhasePoint>| -> [f64; 4] {
            let mut solid = 0.0;
            let mut cos = 0.0;
            let mut rfrac = 0.0;
            let mut phi2 = 0.0;
            let mut count = 0.0;
            for x in points {
                solid += x.wall.is_solid() as u8 as f64;
                cos += x.phi.cos();
                rfrac += x.r / t.wall_len(x.wall);
                phi2 += x.phi * x.phi;
                count += 1.0;
            }
            [solid / count, cos / count, rfrac / count, phi2 / count]
        };
        let mut rng1 = crate::rng::stream_rng(7, 0);
        let mut pushed = Vec::with_capacity(n);
        while pushed.len() < n {
            let x = sample_mu(&t, &c, &mut rng1);
            if let Ok(rec) = step(&t, &c, &x) {
                pushed.push(rec.to);
            }
        }
        let mut rng2 = crate::rng::stream_rng(7, 1);
        let mut direct = Vec::with_capacity(n);
        while direct.len() < n {
            direct.push(sample_mu(&t, &c, &mut rng2));
        }
        let a = stats(&mut pushed.into_iter());
        let b = stats(&mut direct.into_iter());
        // Two-sample tolerances at roughly four standard errors.
        let tol = [0.011, 0.008, 0.008, 0.012];
        for k in 0..4 {
            assert!(
                (a[k] - b[k]).abs() < tol[k],
                "statistic {k}: pushforward {} vs direct {}",
                a[k],
                b[k]
            );
        }
    }

    #[test]
    fn unstable_cone_is_invariant_and_expanded() {
        let t = table();
        let c = centering();
        let mut rng = crate::rng::stream_rng(8, 0);
        let lambda = t.lambda();
        for _ in 0..2_000 {
            let x = sample_mu(&t, &c, &mut rng);
            let Ok((rec, m)) = step_with_tangent(&t, &c, &x) else {
                continue;
            };
            let (a0, b0) = x.unstable_cone(&t);
            let (a1, b1) = rec.to.unstable_cone(&t);
            let u: f64 = rng.gen();
            let slope = a0 + (b0 - a0) * u;
            let v0 = V2::new(1.0, slope);
            let v1 = m * v0;
            let s1 = v1.y / v1.x;
            assert!(
                s1 >= a1 - 1e-9 && s1 <= b1 + 1e-9,
                "cone violated: slope {slope} at {x:?} maps to {s1} outside [{a1}, {b1}]"
            );
            let growth = p_seminorm(rec.to.phi, &v1) / p_seminorm(x.phi, &v0);
            assert!(
                growth >= lambda - 1e-9,
                "p-expansion {growth} below {lambda} at {x:?}"
            );
        }
    }

    #[test]
    fn hyperbolicity_sweep_passes_at_small_scale() {
        let t = table();
        let rep = hyperbolicity_check(&t, 4, 400, 60, 12, 10);
        assert_eq!(rep.cone_violations, 0, "{rep:?}");
        assert!(
            rep.min_leg_expansion >= rep.lambda - 1e-9,
            "leg expansion {} below {}",
            rep.min_leg_expansion,
            rep.lambda
        );
        for e in &rep.euclidean {
            assert!(e.min_ratio >= 1.0, "n = {}: ratio {}", e.n, e.min_ratio);
        }
        assert!(rep.pass);
        assert_eq!(rep.cone_checks, 3 * 4 * 400);
    }

    #[test]
    fn white_disk_is_reachable_and_white_legs_have_sane_counts() {
        let t = table();
        let c = centering();
        let mut rng = crate::rng::stream_rng(9, 0);
        let mut whites = 0u32;
        let n = 20_000;
        let mut done = 0;
        while done < n {
            let x = sample_mu(&t, &c, &mut rng);
            let Ok(rec) = step(&t, &c, &x) else { continue };
            whites += rec.white_hits;
            assert!(rec.legs <= 5, "suspicious leg count {}", rec.legs);
            done += 1;
        }
        let frac = whites as f64 / n as f64;
        // The extended map preserves the extended measure, so the expected
        // number of white collisions per base return is the mass ratio
        // nu(white boundary) / nu(base section).
        let m = crate::phase::measure_masses(&t);
        let expected = m.white / m.base;
        assert!(
            (frac - expected).abs() < 0.015,
            "white hits per return {frac}, expected {expected}"
        );
    }

    #[test]
    fn separation_time_behaves() {
        let t = table();
        let c = centering();
        let x = PhasePoint::new(Wall::W1, 0.2, 0.3);
        assert_eq!(separation_time(&t, &c, &x, &x, 12, 10), 12);
        let y = PhasePoint::new(Wall::W3, 0.2, 0.3);
        assert_eq!(separation_time(&t, &c, &x, &y, 12, 10), 0);
        let z = PhasePoint::new(Wall::W1, 0.2 + 1e-9, 0.3);
        let s = separation_time(&t, &c, &x, &z, 40, 10);
        assert!(s >= 3, "nearby points separated immediately: {s}");
    }

    #[test]
    fn observed_flights_stay_inside_the_certified_bracket() {
        let t = table();
        let cs = [
            Centering::ZERO,
            Centering::new(0.0099, 0.0),
            Centering::new(-0.007, 0.007),
        ];
        let (lo, hi) = observed_flight_range(&t, &cs, 2_000, 10);
        assert!(lo >= t.tau_min, "leg {lo} below certified {}", t.tau_min);
        assert!(hi <= t.tau_max, "leg {hi} above certified {}", t.tau_max);
        // The bracket should not be absurdly loose on the observed side.
        assert!(lo < 0.6, "shortest observed leg {lo}");
        assert!(hi > 1.0, "longest observed leg {hi}");
    }

    #[test]
    fn singular_inputs_are_rejected() {
        let t = table();
        let c = centering();
        // Aim straight at a wall corner: the orbit must refuse.
        let x = PhasePoint::new(Wall::Star, 0.0, 0.0);
        let err = singularity_margin(&t, &c, &x, 3).unwrap_err();
        match err {
            Error::SingularityProximity { .. } | Error::OutsideSection(_) => {}
            other => panic!("expected singular rejection, got {other:?}"),
        }
    }
}
