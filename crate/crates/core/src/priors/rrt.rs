//! RRT* in joint space. The scene is obstacle-free, so the only feasibility
//! constraint is the joint-limit box; straight segments between in-limit
//! configurations are always valid.

use nalgebra::Matrix6;
use rand::Rng;
use rand_distr::StandardNormal;
use std::io::Write;

use crate::dynamics::JointVec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RrtSettings {
    /// Steering step (rad, joint-space L2).
    pub step: f64,
    pub gamma: f64,
    pub goal_bias: f64,
    pub budget: usize,
    pub goal_tolerance: f64,
    /// Best cost is recorded every this many iterations.
    pub record_every: usize,
    /// After the first solution, sample only where a shorter path could pass.
    pub informed: bool,
}

impl Default for RrtSettings {
    fn default() -> Self {
        Self {
            step: 0.3,
            gamma: 4.0,
            goal_bias: 0.1,
            budget: 3000,
            goal_tolerance: 0.05,
            record_every: 500,
            informed: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum PlanError {
    #[error("start configuration violates joint limits")]
    StartOutOfLimits,
    #[error("no goal configuration lies within joint limits")]
    NoValidGoal,
    #[error("no goal connection within {0} iterations")]
    PlanningFailed(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointPath {
    pub waypoints: Vec<JointVec>,
    pub cost: f64,
}

impl JointPath {
    pub fn from_waypoints(waypoints: Vec<JointVec>) -> Self {
        let cost = waypoints.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
        Self { waypoints, cost }
    }

    /// Inserts intermediate points so no segment is longer than `max_step`.
    pub fn densified(&self, max_step: f64) -> Self {
        let mut out = vec![self.waypoints[0]];
        for w in self.waypoints.windows(2) {
            let d = (w[1] - w[0]).norm();
            let n = (d / max_step).ceil().max(1.0) as usize;
            for k in 1..=n {
                out.push(w[0] + (w[1] - w[0]) * (k as f64 / n as f64));
            }
        }
        Self {
            waypoints: out,
            cost: self.cost,
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["i", "q1", "q2", "q3", "q4", "q5", "q6"])?;
        for (i, q) in self.waypoints.iter().enumerate() {
            let mut row = vec![i.to_string()];
            row.extend(q.iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutcome {
    pub path: JointPath,
    /// Best goal-reaching cost after every `record_every` iterations
    /// (infinite before the first connection).
    pub cost_history: Vec<f64>,
    pub tree_size: usize,
}

struct Node {
    q: JointVec,
    parent: usize,
    cost: f64,
    children: Vec<usize>,
}

struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn nearest(&self, q: &JointVec) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, n) in self.nodes.iter().enumerate() {
            let d = (n.q - q).norm_squared();
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }

    fn near(&self, q: &JointVec, radius: f64) -> Vec<usize> {
        let r2 = radius * radius;
        (0..self.nodes.len())
            .filter(|&i| (self.nodes[i].q - q).norm_squared() <= r2)
            .collect()
    }

    fn reparent(&mut self, child: usize, parent: usize, cost: f64) {
        let old = self.nodes[child].parent;
        self.nodes[old].children.retain(|&c| c != child);
        self.nodes[parent].children.push(child);
        self.nodes[child].parent = parent;
        let delta = self.nodes[child].cost - cost;
        let mut stack = vec![child];
        while let Some(i) = stack.pop() {
            self.nodes[i].cost -= delta;
            stack.extend(self.nodes[i].children.iter().copied());
        }
    }

    fn path_to(&self, mut i: usize) -> Vec<JointVec> {
        let mut out = vec![self.nodes[i].q];
        while i != 0 {
            i = self.nodes[i].parent;
            out.push(self.nodes[i].q);
        }
        out.reverse();
        out
    }
}

/// Uniform samples from the prolate hyperspheroid of configurations whose
/// start-to-goal detour is at most `c_best`.
struct Ellipsoid {
    center: JointVec,
    frame: Matrix6<f64>,
    radii: JointVec,
}

impl Ellipsoid {
    fn new(start: &JointVec, goal: &JointVec, c_best: f64) -> Self {
        let d = goal - start;
        let c_min = d.norm();
        // Householder reflection taking e1 onto the focal axis
        let e1 = JointVec::x();
        let axis = d / c_min;
        let v = e1 - axis;
        let frame = if v.norm() < 1e-12 {
            Matrix6::identity()
        } else {
            Matrix6::identity() - v * v.transpose() * (2.0 / v.norm_squared())
        };
        let minor = (c_best * c_best - c_min * c_min).max(0.0).sqrt() / 2.0;
        let mut radii = JointVec::repeat(minor);
        radii[0] = c_best / 2.0;
        Self {
            center: (start + goal) / 2.0,
            frame,
            radii,
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> JointVec {
        let dir = JointVec::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        let r = rng.random::<f64>().powf(1.0 / 6.0);
        let ball = dir * (r / dir.norm());
        self.center + self.frame * ball.component_mul(&self.radii)
    }
}

fn steer(from: &JointVec, to: &JointVec, step: f64) -> JointVec {
    let d = to - from;
    let n = d.norm();
    if n <= step {
        *to
    } else {
        from + d * (step / n)
    }
}

/// Plans from `start` to within `goal_tolerance` of any configuration in
/// `goals`, sampling uniformly inside `limits` (symmetric, per joint).
pub fn rrt_star_plan<R: Rng + ?Sized>(
    start: &JointVec,
    goals: &[JointVec],
    limits: &JointVec,
    s: &RrtSettings,
    rng: &mut R,
) -> Result<PlanOutcome, PlanError> {
    let inside = |q: &JointVec| q.iter().zip(limits.iter()).all(|(v, l)| v.abs() <= *l);
    if !inside(start) {
        return Err(PlanError::StartOutOfLimits);
    }
    let goals: Vec<JointVec> = goals.iter().copied().filter(inside).collect();
    if goals.is_empty() {
        return Err(PlanError::NoValidGoal);
    }
    let reaches = |q: &JointVec| goals.iter().any(|g| (g - q).norm() <= s.goal_tolerance);
    if reaches(start) {
        return Ok(PlanOutcome {
            path: JointPath::from_waypoints(vec![*start]),
            cost_history: vec![0.0; s.budget / s.record_every.max(1)],
            tree_size: 1,
        });
    }

    let mut tree = Tree {
        nodes: vec![Node {
            q: *start,
            parent: 0,
            cost: 0.0,
            children: Vec::new(),
        }],
    };
    let mut goal_nodes: Vec<usize> = Vec::new();
    let mut history = Vec::new();
    let best = |tree: &Tree, goal_nodes: &[usize]| {
        goal_nodes
            .iter()
            .map(|&i| (tree.nodes[i].cost, i))
            .fold((f64::INFINITY, 0), |a, b| if b.0 < a.0 { b } else { a })
    };

    let mut informed: Option<(usize, Ellipsoid)> = None;
    for iter in 1..=s.budget {
        let n = tree.nodes.len() as f64 + 1.0;
        let radius = s.gamma * (n.ln() / n).powf(1.0 / 6.0);
        let sample = if rng.random::<f64>() < s.goal_bias {
            goals[rng.random_range(0..goals.len())]
        } else if let Some((_, ell)) = &informed {
            // bounded rejection keeps the draw count deterministic per seed
            let mut q = ell.sample(rng);
            for _ in 0..64 {
                if inside(&q) {
                    break;
                }
                q = ell.sample(rng);
            }
            q.zip_map(limits, |v, l| v.clamp(-l, l))
        } else {
            JointVec::from_fn(|i, _| rng.random_range(-limits[i]..=limits[i]))
        };
        let nearest = tree.nearest(&sample);
        let q_new = steer(&tree.nodes[nearest].q, &sample, s.step);

        let near = tree.near(&q_new, radius);

        let mut parent = nearest;
        let mut cost = tree.nodes[nearest].cost + (q_new - tree.nodes[nearest].q).norm();
        for &i in &near {
            let c = tree.nodes[i].cost + (q_new - tree.nodes[i].q).norm();
            if c < cost {
                cost = c;
                parent = i;
            }
        }
        let id = tree.nodes.len();
        tree.nodes.push(Node {
            q: q_new,
            parent,
            cost,
            children: Vec::new(),
        });
        tree.nodes[parent].children.push(id);

        for &i in &near {
            if i == parent {
                continue;
            }
            let c = cost + (tree.nodes[i].q - q_new).norm();
            if c < tree.nodes[i].cost - 1e-12 {
                tree.reparent(i, id, c);
            }
        }
        if reaches(&q_new) {
            goal_nodes.push(id);
        }
        if s.informed && !goal_nodes.is_empty() {
            let (c_best, node) = best(&tree, &goal_nodes);
            if informed.as_ref().is_none_or(|(n, e)| *n != node || e.radii[0] * 2.0 > c_best) {
                let goal = tree.nodes[node].q;
                informed = Some((node, Ellipsoid::new(start, &goal, c_best)));
            }
        }
        if iter % s.record_every.max(1) == 0 {
            history.push(best(&tree, &goal_nodes).0);
        }
    }

    let (cost, node) = best(&tree, &goal_nodes);
    if !cost.is_finite() {
        return Err(PlanError::PlanningFailed(s.budget));
    }
    Ok(PlanOutcome {
        path: JointPath::from_waypoints(tree.path_to(node)),
        cost_history: history,
        tree_size: tree.nodes.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn limits() -> JointVec {
        JointVec::new(2.0 * PI, 2.0 * PI, 2.0 * PI, PI, PI, PI)
    }

    fn random_q(rng: &mut impl Rng) -> JointVec {
        JointVec::from_fn(|_, _| rng.random_range(-PI..PI))
    }

    #[test]
    fn start_in_goal_set_is_trivial() {
        let q = JointVec::repeat(0.2);
        let out = rrt_star_plan(&q, &[q], &limits(), &RrtSettings::default(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(out.path.waypoints, vec![q]);
        assert_eq!(out.path.cost, 0.0);
    }

    #[test]
    fn goal_outside_limits_fails() {
        let goal = JointVec::new(0.0, 0.0, 0.0, 4.0, 0.0, 0.0);
        let r = rrt_star_plan(&JointVec::zeros(), &[goal], &limits(), &RrtSettings::default(), &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(r, Err(PlanError::NoValidGoal));
    }

    #[test]
    fn path_is_consistent_and_near_straight() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = RrtSettings::default();
        for _ in 0..5 {
            let (a, b) = (random_q(&mut rng), random_q(&mut rng));
            let out = rrt_star_plan(&a, &[b], &limits(), &s, &mut rng).unwrap();
            let p = &out.path;
            assert_eq!(p.waypoints[0], a);
            assert!((p.waypoints.last().unwrap() - b).norm() <= s.goal_tolerance);
            let recomputed: f64 = p.waypoints.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
            assert!((recomputed - p.cost).abs() < 1e-9);
            let straight = (b - a).norm();
            assert!(p.cost >= straight - s.goal_tolerance);
            assert!(p.cost <= 1.5 * straight, "{} vs {straight}", p.cost);
            assert!(out.cost_history.windows(2).all(|w| w[1] <= w[0]));
            let dense = p.densified(s.step);
            assert!(dense.waypoints.windows(2).all(|w| (w[1] - w[0]).norm() <= s.step + 1e-12));
        }
    }

    #[test]
    fn same_seed_same_plan() {
        let a = JointVec::zeros();
        let b = JointVec::new(1.0, -2.0, 0.5, 1.0, 0.0, -1.0);
        let plan = |seed| rrt_star_plan(&a, &[b], &limits(), &RrtSettings::default(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        assert_eq!(plan(9), plan(9));
    }
}
