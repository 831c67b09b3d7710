//! Local model of F* at a point: value, representative gradient and the
//! near-optimal faces of nodes close to sing(𝒰_r).
//!
//! The subdifferential of F* (enlarged by the face gap) is the image of a
//! product of faces, one per node. Its minimal-norm point is computed with
//! Wolfe's algorithm, whose linear-minimization oracle separates over nodes.

use nalgebra::{DMatrix, DVector};

use super::{NodeMix, ReachabilityProblem};
use crate::sets::NearFace;

/// A node whose maximizer set is not a single point at the current gap.
#[derive(Debug, Clone)]
pub struct FaceNode {
    pub node: usize,
    pub sigma: f64,
    /// Representative maximizer used in `grad_f_star`.
    pub vertex: Vec<f64>,
    pub face: NearFace,
}

#[derive(Debug, Clone)]
pub struct Linearization {
    pub f_star: f64,
    /// `Σ w σ_i G_i v_i`: the gradient of F* for the representative selection.
    pub grad_f_star: DVector<f64>,
    pub faces: Vec<FaceNode>,
}

/// One extreme point of the product of faces and its image.
#[derive(Debug, Clone)]
pub(crate) struct Atom {
    point: DVector<f64>,
    choice: Vec<Vec<f64>>,
}

/// Minimal-norm point `Σ λ_k atom_k` found by Wolfe's algorithm.
#[derive(Debug, Clone)]
pub(crate) struct MinNormPoint {
    pub point: DVector<f64>,
    atoms: Vec<Atom>,
    weights: Vec<f64>,
}

const WOLFE_TOL: f64 = 1e-12;
const WEIGHT_SNAP: f64 = 1e-12;
const MAX_MAJOR: usize = 1000;

impl ReachabilityProblem {
    /// Evaluate F* at p_f and collect the faces of maximizers within
    /// relative gap `gap_tol` of σ. Nodes flagged singular by the set's
    /// closed-form test always get their face.
    pub fn linearize(&self, p_f: &DVector<f64>, gap_tol: f64) -> Linearization {
        let set = self.set();
        let w = self.grid().weight();
        let scale = 1.0 / set.metric_weight();
        let n = self.system().states();
        let mut grad = DVector::zeros(n);
        let mut f_star = 0.0;
        let mut faces = Vec::new();
        for (i, g) in self.propagator().gains().iter().enumerate() {
            let q = g.tr_mul(p_f) * scale;
            let pair = set.vertex_pair(q.as_slice());
            let sigma = set.inner(q.as_slice(), &pair.vertex).max(0.0);
            if sigma == 0.0 {
                continue;
            }
            f_star += 0.5 * w * sigma * sigma;
            let v = DVector::from_column_slice(&pair.vertex);
            grad.gemv(w * sigma, g, &v, 1.0);
            let gap = (gap_tol * sigma).max(set.tol_singular * q.norm() * set.metric_weight());
            if let Some(face) = set.near_face(q.as_slice(), gap) {
                faces.push(FaceNode {
                    node: i,
                    sigma,
                    vertex: pair.vertex,
                    face,
                });
            }
        }
        Linearization {
            f_star,
            grad_f_star: grad,
            faces,
        }
    }

    /// `scale·w σ_i G_i (u − v_i)` for face node `f`.
    fn face_shift(&self, f: &FaceNode, u: &[f64], scale: f64) -> DVector<f64> {
        let g = &self.propagator().gains()[f.node];
        let diff = DVector::from_iterator(u.len(), u.iter().zip(&f.vertex).map(|(a, b)| a - b));
        g * diff * (scale * self.grid().weight() * f.sigma)
    }

    fn atom_for(&self, lin: &Linearization, base: &DVector<f64>, scale: f64, choice: Vec<Vec<f64>>) -> Atom {
        let mut point = base.clone();
        for (f, u) in lin.faces.iter().zip(&choice) {
            point += self.face_shift(f, u, scale);
        }
        Atom { point, choice }
    }

    /// Atom minimizing `⟨r, ·⟩`.
    fn lmo(&self, lin: &Linearization, base: &DVector<f64>, scale: f64, r: &DVector<f64>) -> Atom {
        let choice = lin
            .faces
            .iter()
            .map(|f| {
                let c = self.propagator().gains()[f.node].tr_mul(r);
                f.face.minimize(c.as_slice())
            })
            .collect();
        self.atom_for(lin, base, scale, choice)
    }

    /// Minimal-norm point of `base + scale·Σ_i w σ_i G_i (F_i − v_i)` over the
    /// faces `F_i` of `lin` (`scale ≥ 0`).
    pub(crate) fn min_norm_point(&self, lin: &Linearization, base: &DVector<f64>, scale: f64) -> MinNormPoint {
        let rep = Atom {
            point: base.clone(),
            choice: lin.faces.iter().map(|f| f.vertex.clone()).collect(),
        };
        if lin.faces.is_empty() || scale <= 0.0 {
            return MinNormPoint {
                point: base.clone(),
                atoms: vec![rep],
                weights: vec![1.0],
            };
        }
        let mut atoms = vec![rep];
        let mut weights = vec![1.0];
        let mut x = base.clone();
        for _ in 0..MAX_MAJOR {
            let s = self.lmo(lin, base, scale, &x);
            let size = atoms
                .iter()
                .map(|a| a.point.norm_squared())
                .fold(s.point.norm_squared(), f64::max);
            if x.norm_squared() - x.dot(&s.point) <= WOLFE_TOL * size {
                break;
            }
            if atoms.iter().any(|a| a.choice == s.choice) {
                break;
            }
            atoms.push(s);
            weights.push(0.0);
            loop {
                let alpha = affine_minimizer(&atoms);
                if alpha.iter().all(|a| *a > WEIGHT_SNAP) {
                    weights = alpha;
                    break;
                }
                let mut theta = 1.0f64;
                for (l, a) in weights.iter().zip(&alpha) {
                    if *a <= WEIGHT_SNAP && l - a > 0.0 {
                        theta = theta.min(l / (l - a));
                    }
                }
                for (l, a) in weights.iter_mut().zip(&alpha) {
                    *l = (1.0 - theta) * *l + theta * a;
                }
                let keep: Vec<bool> = weights.iter().map(|l| *l > WEIGHT_SNAP).collect();
                let mut k = 0;
                atoms.retain(|_| {
                    k += 1;
                    keep[k - 1]
                });
                weights.retain(|l| *l > WEIGHT_SNAP);
                let total: f64 = weights.iter().sum();
                weights.iter_mut().for_each(|l| *l /= total);
                if atoms.len() == 1 {
                    break;
                }
            }
            let next = combine(&atoms, &weights);
            // Stop once the decrease falls below round-off.
            let stalled = next.norm_squared() >= x.norm_squared() * (1.0 - 1e-14);
            x = next;
            if stalled {
                break;
            }
        }
        MinNormPoint {
            point: combine(&atoms, &weights),
            atoms,
            weights,
        }
    }

    /// Per-node mixtures of the minimal-norm point. With `purify` the
    /// weights are moved, keeping the image fixed, to a basic solution with
    /// at most n mixed nodes. Returns the selection and the rebuilt point.
    pub(crate) fn node_mixtures(
        &self,
        lin: &Linearization,
        base: &DVector<f64>,
        scale: f64,
        mnp: &MinNormPoint,
        purify: bool,
    ) -> (Vec<NodeMix>, DVector<f64>) {
        let mut mixes: Vec<Vec<(Vec<f64>, f64)>> = vec![Vec::new(); lin.faces.len()];
        for (atom, lambda) in mnp.atoms.iter().zip(&mnp.weights) {
            for (mix, u) in mixes.iter_mut().zip(&atom.choice) {
                match mix.iter_mut().find(|(v, _)| v == u) {
                    Some(entry) => entry.1 += lambda,
                    None => mix.push((u.clone(), *lambda)),
                }
            }
        }
        if purify {
            self.purify_mixtures(lin, &mut mixes);
        }
        let mut point = base.clone();
        let mut selection = Vec::new();
        for (f, mix) in lin.faces.iter().zip(mixes) {
            let mut combo = vec![0.0; f.vertex.len()];
            for (u, l) in &mix {
                combo.iter_mut().zip(u).for_each(|(c, x)| *c += l * x);
            }
            point += self.face_shift(f, &combo, scale);
            if mix.len() == 1 && mix[0].0 == f.vertex {
                continue;
            }
            let (vertices, weights) = mix.into_iter().unzip();
            selection.push(NodeMix {
                node: f.node,
                vertices,
                weights,
            });
        }
        (selection, point)
    }

    fn purify_mixtures(&self, lin: &Linearization, mixes: &mut [Vec<(Vec<f64>, f64)>]) {
        let dim = self.system().states();
        loop {
            // Free variables: every non-pivot entry of a mixed node.
            let mut vars: Vec<(usize, usize, usize)> = Vec::new();
            for (f, mix) in mixes.iter().enumerate() {
                if mix.len() < 2 {
                    continue;
                }
                let pivot = (0..mix.len()).max_by(|&a, &b| mix[a].1.total_cmp(&mix[b].1)).unwrap();
                vars.extend((0..mix.len()).filter(|&s| s != pivot).map(|s| (f, s, pivot)));
            }
            if vars.len() <= dim {
                return;
            }
            let cols = &vars[..dim + 1];
            let dirs: Vec<DVector<f64>> = cols
                .iter()
                .map(|&(f, s, p)| {
                    let face = &lin.faces[f];
                    let diff: Vec<f64> = mixes[f][s].0.iter().zip(&mixes[f][p].0).map(|(a, b)| a - b).collect();
                    let g = &self.propagator().gains()[face.node];
                    g * DVector::from_vec(diff) * (self.grid().weight() * face.sigma)
                })
                .collect();
            let gram = DMatrix::from_fn(dim + 1, dim + 1, |a, b| dirs[a].dot(&dirs[b]));
            let eig = gram.symmetric_eigen();
            let z = eig.eigenvectors.column(eig.eigenvalues.imin()).into_owned();
            // Net change of each pivot per unit step.
            let mut pivot_rate: Vec<f64> = vec![0.0; mixes.len()];
            for (a, &(f, _, _)) in cols.iter().enumerate() {
                pivot_rate[f] -= z[a];
            }
            let limit = |sign: f64| -> f64 {
                let mut t = f64::INFINITY;
                for (a, &(f, s, _)) in cols.iter().enumerate() {
                    if sign * z[a] < 0.0 {
                        t = t.min(mixes[f][s].1 / (-sign * z[a]));
                    }
                }
                for (f, rate) in pivot_rate.iter().enumerate() {
                    if sign * rate < 0.0 {
                        let p = cols.iter().find(|c| c.0 == f).unwrap().2;
                        t = t.min(mixes[f][p].1 / (-sign * rate));
                    }
                }
                t
            };
            let (up, down) = (limit(1.0), limit(-1.0));
            let (sign, t) = if up <= down { (1.0, up) } else { (-1.0, down) };
            for (a, &(f, s, _)) in cols.iter().enumerate() {
                mixes[f][s].1 += sign * t * z[a];
            }
            let touched: Vec<usize> = {
                let mut v: Vec<usize> = cols.iter().map(|c| c.0).collect();
                v.dedup();
                v
            };
            for f in touched {
                let p = cols.iter().find(|c| c.0 == f).unwrap().2;
                let others: f64 = (0..mixes[f].len()).filter(|&s| s != p).map(|s| mixes[f][s].1).sum();
                mixes[f][p].1 = 1.0 - others;
                let before = mixes[f].len();
                mixes[f].retain(|(_, l)| *l > WEIGHT_SNAP);
                if mixes[f].len() < before {
                    let total: f64 = mixes[f].iter().map(|e| e.1).sum();
                    mixes[f].iter_mut().for_each(|e| e.1 /= total);
                }
            }
        }
    }
}

fn combine(atoms: &[Atom], weights: &[f64]) -> DVector<f64> {
    let mut x = DVector::zeros(atoms[0].point.len());
    for (a, l) in atoms.iter().zip(weights) {
        x.axpy(*l, &a.point, 1.0);
    }
    x
}

/// Weights of the minimal-norm point of the affine hull of the atoms.
fn affine_minimizer(atoms: &[Atom]) -> Vec<f64> {
    let k = atoms.len();
    let m = DMatrix::from_fn(k, k, |a, b| atoms[a].point.dot(&atoms[b].point) + 1.0);
    let ones = DVector::from_element(k, 1.0);
    let sol = match m.clone().cholesky() {
        Some(ch) => ch.solve(&ones),
        None => m.svd(true, true).solve(&ones, 1e-14).expect("SVD with vectors"),
    };
    let total: f64 = sol.iter().sum();
    sol.iter().map(|x| x / total).collect()
}
