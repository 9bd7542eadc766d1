//! Event-driven hard-sphere flow: free streaming plus instantaneous elastic
//! pair collisions. Particle indices are 0-based here.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec3 = [f64; 3];

/// Largest particle number the event loop accepts.
pub const MAX_PARTICLES: usize = 8;
/// Relative contact tolerance `ε_contact / σ`.
pub const CONTACT_TOLERANCE: f64 = 1e-10;
/// Relative event-coincidence tolerance `ε_event / τ`, `τ = σ / max|p|`.
pub const EVENT_TOLERANCE: f64 = 1e-9;
/// Collisions per `evolve` call before the trajectory is declared a cascade.
pub const MAX_COLLISIONS: usize = 10_000;

pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale(a: Vec3, c: f64) -> Vec3 {
    [a[0] * c, a[1] * c, a[2] * c]
}

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub q: Vec3,
    pub p: Vec3,
}

impl PhasePoint {
    pub fn new(q: Vec3, p: Vec3) -> Self {
        PhasePoint { q, p }
    }

    pub fn reversed(self) -> Self {
        PhasePoint {
            q: self.q,
            p: scale(self.p, -1.0),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(&self.p).all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub sigma: f64,
    pub points: Vec<PhasePoint>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionEvent {
    pub time: f64,
    pub pair: (usize, usize),
    /// `(q_i - q_j) / σ` at contact.
    pub eta: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PathologyKind {
    TripleContact,
    SimultaneousPairs,
    CollisionCascade,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathologyFlag {
    pub kind: PathologyKind,
    pub time: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("eta is not on the approach hemisphere: <eta, p1 - p2> = {0}")]
    NotApproaching(f64),
    #[error("spheres {i} and {j} overlap (distance {distance})")]
    Overlap { i: usize, j: usize, distance: f64 },
    #[error("{kind:?} at t = {time}")]
    Pathology { kind: PathologyKind, time: f64 },
    #[error("non-finite phase coordinates")]
    NonFinite,
    #[error("{0} particles exceed the event-driven cap of {MAX_PARTICLES}")]
    TooManyParticles(usize),
    #[error("sphere diameter must be positive and finite, got {0}")]
    BadDiameter(f64),
}

impl DynamicsError {
    pub fn is_pathology(&self) -> bool {
        matches!(self, DynamicsError::Pathology { .. })
    }
}

/// Elastic collision law. `eta` must satisfy `<eta, p1 - p2> > 0`.
pub fn apply_collision(p1: Vec3, p2: Vec3, eta: Vec3) -> Result<(Vec3, Vec3), DynamicsError> {
    let w = dot(eta, sub(p1, p2));
    if !(w > 0.0) {
        return Err(DynamicsError::NotApproaching(w));
    }
    Ok((sub(p1, scale(eta, w)), add(p2, scale(eta, w))))
}

/// Whether no pair overlaps beyond the contact tolerance.
pub fn is_allowed(points: &[PhasePoint], sigma: f64) -> bool {
    let min = sigma * (1.0 - CONTACT_TOLERANCE);
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d = sub(points[i].q, points[j].q);
            if dot(d, d) < min * min {
                return false;
            }
        }
    }
    true
}

/// Earliest contact time of an approaching pair, if any.
fn pair_contact_time(a: &PhasePoint, b: &PhasePoint, sigma: f64) -> Option<f64> {
    let dq = sub(a.q, b.q);
    let dv = sub(a.p, b.p);
    let bq = dot(dq, dv);
    if bq >= 0.0 {
        return None;
    }
    let av = dot(dv, dv);
    let c = dot(dq, dq) - sigma * sigma;
    if c <= 0.0 {
        return Some(0.0);
    }
    let disc = bq * bq - av * c;
    if disc <= 0.0 {
        return None;
    }
    // stable root of a t² + 2 b t + c = 0
    Some(c / (-bq + disc.sqrt()))
}

fn characteristic_time(points: &[PhasePoint], sigma: f64) -> f64 {
    let vmax = points.iter().map(|x| norm(x.p)).fold(0.0, f64::max);
    if vmax > 0.0 {
        sigma / vmax
    } else {
        f64::INFINITY
    }
}

fn validate(c: &Configuration) -> Result<(), DynamicsError> {
    if !(c.sigma > 0.0 && c.sigma.is_finite()) {
        return Err(DynamicsError::BadDiameter(c.sigma));
    }
    if c.points.len() > MAX_PARTICLES {
        return Err(DynamicsError::TooManyParticles(c.points.len()));
    }
    if !c.points.iter().all(PhasePoint::is_finite) {
        return Err(DynamicsError::NonFinite);
    }
    Ok(())
}

/// Coincidences are only flagged for events that happen before `horizon`.
fn earliest_event(
    points: &[PhasePoint],
    sigma: f64,
    now: f64,
    horizon: f64,
) -> Result<Option<CollisionEvent>, DynamicsError> {
    let mut first: Option<(f64, usize, usize)> = None;
    let mut second: Option<(f64, usize, usize)> = None;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if let Some(t) = pair_contact_time(&points[i], &points[j], sigma) {
                let cand = (t, i, j);
                match first {
                    Some(f) if t >= f.0 => {
                        if second.map_or(true, |s| t < s.0) {
                            second = Some(cand);
                        }
                    }
                    _ => {
                        second = first;
                        first = Some(cand);
                    }
                }
            }
        }
    }
    let Some((t, i, j)) = first else {
        return Ok(None);
    };
    if let Some((t2, k, l)) = second.filter(|_| t <= horizon) {
        if t2 - t < EVENT_TOLERANCE * characteristic_time(points, sigma) {
            let kind = if i == k || i == l || j == k || j == l {
                PathologyKind::TripleContact
            } else {
                PathologyKind::SimultaneousPairs
            };
            return Err(DynamicsError::Pathology { kind, time: now + t });
        }
    }
    let at_contact = sub(
        add(points[i].q, scale(points[i].p, t)),
        add(points[j].q, scale(points[j].p, t)),
    );
    Ok(Some(CollisionEvent {
        time: t,
        pair: (i, j),
        eta: scale(at_contact, 1.0 / norm(at_contact)),
    }))
}

/// Earliest future collision of the configuration.
pub fn next_collision(c: &Configuration) -> Result<Option<CollisionEvent>, DynamicsError> {
    validate(c)?;
    earliest_event(&c.points, c.sigma, 0.0, f64::INFINITY)
}

/// One row of a trajectory dump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub t: f64,
    pub i: usize,
    pub qx: f64,
    pub qy: f64,
    pub qz: f64,
    pub px: f64,
    pub py: f64,
    pub pz: f64,
}

fn record(trace: &mut Vec<TrajectoryRecord>, t: f64, points: &[PhasePoint]) {
    for (i, x) in points.iter().enumerate() {
        trace.push(TrajectoryRecord {
            t,
            i,
            qx: x.q[0],
            qy: x.q[1],
            qz: x.q[2],
            px: x.p[0],
            py: x.p[1],
            pz: x.p[2],
        });
    }
}

fn stream_all(points: &mut [PhasePoint], dt: f64) {
    for x in points.iter_mut() {
        x.q = add(x.q, scale(x.p, dt));
    }
}

/// Forward flow over `t >= 0`; returns the number of collisions.
fn flow_forward(
    points: &mut [PhasePoint],
    sigma: f64,
    t: f64,
    mut trace: Option<&mut Vec<TrajectoryRecord>>,
) -> Result<usize, DynamicsError> {
    let mut elapsed = 0.0;
    let mut collisions = 0;
    loop {
        let remaining = t - elapsed;
        let event = earliest_event(points, sigma, elapsed, remaining)?;
        match event {
            Some(ev) if ev.time <= remaining => {
                stream_all(points, ev.time);
                elapsed += ev.time;
                let (i, j) = ev.pair;
                let r = sub(points[i].q, points[j].q);
                let eta = scale(r, 1.0 / norm(r));
                // re-project onto exact contact
                let mid = scale(add(points[i].q, points[j].q), 0.5);
                points[i].q = add(mid, scale(eta, 0.5 * sigma));
                points[j].q = sub(mid, scale(eta, 0.5 * sigma));
                let (pj, pi) = apply_collision(points[j].p, points[i].p, eta)?;
                points[i].p = pi;
                points[j].p = pj;
                collisions += 1;
                if collisions > MAX_COLLISIONS {
                    return Err(DynamicsError::Pathology {
                        kind: PathologyKind::CollisionCascade,
                        time: elapsed,
                    });
                }
                if let Some(tr) = trace.as_deref_mut() {
                    record(tr, elapsed, points);
                }
            }
            _ => {
                stream_all(points, remaining);
                return Ok(collisions);
            }
        }
    }
}

fn evolve_impl(
    c: &Configuration,
    t: f64,
    trace: Option<&mut Vec<TrajectoryRecord>>,
) -> Result<Configuration, DynamicsError> {
    validate(c)?;
    if !t.is_finite() {
        return Err(DynamicsError::NonFinite);
    }
    for i in 0..c.points.len() {
        for j in i + 1..c.points.len() {
            let d = norm(sub(c.points[i].q, c.points[j].q));
            if d < c.sigma * (1.0 - CONTACT_TOLERANCE) {
                return Err(DynamicsError::Overlap { i, j, distance: d });
            }
        }
    }
    let mut points = c.points.clone();
    if t >= 0.0 {
        flow_forward(&mut points, c.sigma, t, trace)?;
    } else {
        // time reversal: S(-t) = R S(t) R with R reversing all momenta
        points.iter_mut().for_each(|x| *x = x.reversed());
        flow_forward(&mut points, c.sigma, -t, trace)?;
        points.iter_mut().for_each(|x| *x = x.reversed());
    }
    Ok(Configuration {
        sigma: c.sigma,
        points,
    })
}

/// Phase point after time `t` (either sign).
pub fn evolve(c: &Configuration, t: f64) -> Result<Configuration, DynamicsError> {
    evolve_impl(c, t, None)
}

/// Like [`evolve`], also returning the state at `0`, every collision and `t`.
/// For `t < 0` the recorded momenta are those of the reversed forward run.
pub fn trajectory(c: &Configuration, t: f64) -> Result<(Configuration, Vec<TrajectoryRecord>), DynamicsError> {
    let mut trace = Vec::new();
    record(&mut trace, 0.0, &c.points);
    let end = evolve_impl(c, t, Some(&mut trace))?;
    record(&mut trace, t.abs(), &end.points);
    Ok((end, trace))
}

pub fn write_trajectory_csv<W: Write>(out: W, records: &[TrajectoryRecord]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// `(S(t) b)(x) = b(X(t, x))`, and `0` on forbidden configurations.
pub fn act_on_observable<F>(b: F, c: &Configuration, t: f64) -> Result<f64, DynamicsError>
where
    F: Fn(&[PhasePoint]) -> f64,
{
    if !is_allowed(&c.points, c.sigma) {
        return Ok(0.0);
    }
    Ok(b(&evolve(c, t)?.points))
}

/// `(S*(t) f)(x) = f(X(-t, x))`.
pub fn act_on_state<F>(f: F, c: &Configuration, t: f64) -> Result<f64, DynamicsError>
where
    F: Fn(&[PhasePoint]) -> f64,
{
    act_on_observable(f, c, -t)
}

pub fn total_momentum(points: &[PhasePoint]) -> Vec3 {
    points.iter().fold([0.0; 3], |acc, x| add(acc, x.p))
}

/// `Σ |p_i|² / 2`.
pub fn kinetic_energy(points: &[PhasePoint]) -> f64 {
    0.5 * points.iter().map(|x| dot(x.p, x.p)).sum::<f64>()
}

/// Smallest pair distance of a configuration (infinite for fewer than two spheres).
pub fn min_pair_distance(points: &[PhasePoint]) -> f64 {
    let mut m = f64::INFINITY;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            m = m.min(norm(sub(points[i].q, points[j].q)));
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn head_on() -> Configuration {
        Configuration {
            sigma: 1.0,
            points: vec![
                PhasePoint::new([0.0, 0.0, 0.0], [1.0, 0.0, 0.0]),
                PhasePoint::new([3.0, 0.0, 0.0], [-1.0, 0.0, 0.0]),
            ],
        }
    }

    #[test]
    fn collision_law_examples() {
        let (a, b) = apply_collision([1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]).unwrap();
        assert_eq!((a, b), ([-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]));
        let (a, b) = apply_collision([2.0, 1.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]).unwrap();
        assert_eq!((a, b), ([0.0, 1.0, 0.0], [2.0, 1.0, 0.0]));
        assert!(apply_collision([1.0, 2.0, 3.0], [1.0, 2.0, 3.0], [1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn head_on_event() {
        let ev = next_collision(&head_on()).unwrap().unwrap();
        assert!((ev.time - 1.0).abs() < 1e-15);
        assert_eq!(ev.pair, (0, 1));
        assert!((ev.eta[0] + 1.0).abs() < 1e-15 && ev.eta[1] == 0.0 && ev.eta[2] == 0.0);
    }

    #[test]
    fn no_event_cases() {
        let mut c = head_on();
        c.points[1].p = [1.0, 0.0, 0.0];
        assert!(next_collision(&c).unwrap().is_none());
        c.points[1].p = [2.0, 0.0, 0.0];
        assert!(next_collision(&c).unwrap().is_none());
    }

    #[test]
    fn head_on_evolution() {
        let end = evolve(&head_on(), 2.0).unwrap();
        assert!(norm(end.points[0].q) < 1e-14);
        assert!(norm(sub(end.points[1].q, [3.0, 0.0, 0.0])) < 1e-14);
        assert_eq!(end.points[0].p, [-1.0, 0.0, 0.0]);
        let back = evolve(&end, -2.0).unwrap();
        for (a, b) in back.points.iter().zip(&head_on().points) {
            assert!(norm(sub(a.q, b.q)) < 1e-12 && norm(sub(a.p, b.p)) < 1e-12);
        }
    }

    #[test]
    fn free_streaming() {
        let c = Configuration {
            sigma: 1.0,
            points: vec![PhasePoint::new([0.0; 3], [1.0, 2.0, 3.0])],
        };
        assert_eq!(evolve(&c, 2.0).unwrap().points[0].q, [2.0, 4.0, 6.0]);
        let v = act_on_observable(|x: &[PhasePoint]| x[0].q[2], &c, 2.0).unwrap();
        assert_eq!(v, 6.0);
    }

    #[test]
    fn forbidden_is_zero() {
        let mut c = head_on();
        c.points[1].q = [0.5, 0.0, 0.0];
        assert_eq!(act_on_observable(|_: &[PhasePoint]| 1.0, &c, 1.0).unwrap(), 0.0);
        assert!(matches!(evolve(&c, 1.0), Err(DynamicsError::Overlap { .. })));
    }

    #[test]
    fn triple_contact_is_flagged() {
        let c = Configuration {
            sigma: 1.0,
            points: vec![
                PhasePoint::new([-3.0, 0.0, 0.0], [1.0, 0.0, 0.0]),
                PhasePoint::new([0.0, 0.0, 0.0], [0.0, 0.0, 0.0]),
                PhasePoint::new([3.0, 0.0, 0.0], [-1.0, 0.0, 0.0]),
            ],
        };
        match next_collision(&c) {
            Err(DynamicsError::Pathology { kind, .. }) => assert_eq!(kind, PathologyKind::TripleContact),
            other => panic!("expected pathology, got {other:?}"),
        }
    }

    #[test]
    fn trajectory_dump() {
        let (_, trace) = trajectory(&head_on(), 2.0).unwrap();
        assert_eq!(trace.len(), 6);
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &trace).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,i,qx,qy,qz,px,py,pz\n"));
        assert_eq!(text.lines().count(), 7);
    }
}
