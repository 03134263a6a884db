//! Branch-ensemble accumulation shared by the weighted and drifted estimators.
//!
//! Branch `b` is one master Brownian path `V` on the full grid. Node `m` reads
//! it backwards from index `L - m`, i.e. `W_r = V_{L-m+r} - V_{L-m}`, so the
//! velocity node visited at master step `v` is always `L - v`. One backward
//! sweep over the master path therefore produces the log-weights of every
//! node at once, and every lattice point is evaluated on the same branch
//! (exactly, through its Fourier series).

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use super::{Estimate, PicardIterate, SolverConfig, BATCHES};
use crate::biot_savart::apply_k;
use crate::brownian::{mix_seed, BrownianPath};
use crate::error::Result;
use crate::fft::Fft2;
use crate::field::{
    forward_transform, inverse_transform, truncate_from_lattice, GridSignal, ScalarField,
};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Largest log-weight accepted before the exponential is declared overflowed.
pub(crate) const MAX_LOG_WEIGHT: f64 = 700.0;

const BRANCH_DOMAIN: u64 = 0x6272_616e_6368;

pub(crate) fn branch_seed(base_seed: u64, branch: u64) -> u64 {
    mix_seed(&[base_seed, BRANCH_DOMAIN, branch])
}

pub(crate) fn master_path(cfg: &SolverConfig, branch: u64) -> Result<BrownianPath> {
    BrownianPath::simulate(branch_seed(cfg.base_seed, branch), cfg.steps, cfg.horizon)
}

fn cis(theta: f64) -> Complex64 {
    let (s, c) = theta.sin_cos();
    Complex64::new(c, s)
}

/// `e^{-4 pi^2 nu |k|^2 tau} psi_hat(k)`.
pub(crate) fn heat_field(psi: &ScalarField, nu: f64, tau: f64) -> ScalarField {
    psi.map_modes(|k1, k2| {
        Complex64::new(
            (-4.0 * PI * PI * nu * (k1 * k1 + k2 * k2) as f64 * tau).exp(),
            0.0,
        )
    })
}

/// Per-node summary of an ensemble: lattice means, standard errors and the
/// per-batch sums kept for jackknife estimates.
#[derive(Debug, Clone)]
pub struct NodeStats {
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct EnsembleStats {
    n: usize,
    branches: usize,
    nodes: Vec<NodeStats>,
    base: Vec<Vec<f64>>,
    batch_counts: Vec<usize>,
    batch_sums: Vec<Vec<Vec<f64>>>,
}

impl EnsembleStats {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn branches(&self) -> usize {
        self.branches
    }

    pub fn batches(&self) -> usize {
        self.batch_counts.len()
    }

    pub fn nodes(&self) -> &[NodeStats] {
        &self.nodes
    }

    pub fn node(&self, m: usize) -> &NodeStats {
        &self.nodes[m]
    }

    /// Largest pointwise standard error over all nodes and lattice points.
    pub fn max_std_error(&self) -> f64 {
        self.nodes
            .iter()
            .flat_map(|s| s.std_error.iter())
            .fold(0.0, |a, &b| a.max(b))
    }

    /// Root-mean-square of the pointwise standard errors at node `m`; the
    /// standard error of the L2 distance to the expectation.
    pub fn pooled_std_error(&self, m: usize) -> f64 {
        let se = &self.nodes[m].std_error;
        (se.iter().map(|s| s * s).sum::<f64>() / se.len() as f64).sqrt()
    }

    /// Estimated fields, node 0 being the terminal data itself.
    pub(crate) fn fields(&self, psi: &ScalarField) -> Result<Vec<ScalarField>> {
        let mut out = Vec::with_capacity(self.nodes.len());
        out.push(psi.clone());
        for node in &self.nodes[1..] {
            out.push(lattice_to_field(self.n, node.mean.clone())?);
        }
        Ok(out)
    }

    /// Delete-one-batch jackknife of a functional of the estimated field
    /// trajectory.
    pub fn jackknife(
        &self,
        psi: &ScalarField,
        functional: impl Fn(&[ScalarField]) -> Result<f64>,
    ) -> Result<Estimate> {
        let value = functional(&self.fields(psi)?)?;
        let g = self.batches();
        if g < 2 {
            return Ok(Estimate {
                value,
                std_error: f64::INFINITY,
            });
        }
        let mut thetas = Vec::with_capacity(g);
        for leave in 0..g {
            let kept = (self.branches - self.batch_counts[leave]) as f64;
            let mut fields = Vec::with_capacity(self.nodes.len());
            fields.push(psi.clone());
            for m in 1..self.nodes.len() {
                let mut lattice = self.base[m].clone();
                for (gi, sums) in self.batch_sums.iter().enumerate() {
                    if gi == leave {
                        continue;
                    }
                    for (v, s) in lattice.iter_mut().zip(&sums[m]) {
                        *v += s / kept;
                    }
                }
                fields.push(lattice_to_field(self.n, lattice)?);
            }
            thetas.push(functional(&fields)?);
        }
        let mean = thetas.iter().sum::<f64>() / g as f64;
        let var =
            thetas.iter().map(|t| (t - mean).powi(2)).sum::<f64>() * (g - 1) as f64 / g as f64;
        Ok(Estimate {
            value,
            std_error: var.sqrt(),
        })
    }
}

fn lattice_to_field(n: usize, values: Vec<f64>) -> Result<ScalarField> {
    Ok(forward_transform(&GridSignal::new(n, values)?)?.project_mean_zero())
}

/// Lattice values of the heat-semigroup control variate at every node.
pub(crate) fn heat_lattices(psi: &ScalarField, nu: f64, dt: f64, steps: usize) -> Vec<Vec<f64>> {
    (0..=steps)
        .map(|m| inverse_transform(&heat_field(psi, nu, m as f64 * dt)).into_values())
        .collect()
}

/// Runs `producer` for every branch and accumulates the per-node samples
/// `X - base` it emits. Batches run in parallel and are reduced in index
/// order, so the result does not depend on the worker count.
pub(crate) fn accumulate<P>(
    cfg: &SolverConfig,
    base: Vec<Vec<f64>>,
    producer: P,
) -> Result<EnsembleStats>
where
    P: Fn(u64, &mut dyn FnMut(usize, &[f64])) -> Result<()> + Sync,
{
    let n = cfg.n;
    let npts = n * n;
    let nodes = cfg.steps + 1;
    let m_total = cfg.inner_branches;
    let g = BATCHES.min(m_total);
    let bounds: Vec<(usize, usize)> = (0..g)
        .map(|i| (i * m_total / g, (i + 1) * m_total / g))
        .collect();

    let pool = cfg.thread_pool()?;
    let batches: Vec<(Vec<Vec<f64>>, Vec<Vec<f64>>)> = pool.install(|| {
        bounds
            .par_iter()
            .map(|&(lo, hi)| {
                let mut s1 = vec![vec![0.0; npts]; nodes];
                let mut s2 = vec![vec![0.0; npts]; nodes];
                for b in lo..hi {
                    producer(b as u64, &mut |m, d| {
                        for ((a, q), &x) in s1[m].iter_mut().zip(s2[m].iter_mut()).zip(d) {
                            *a += x;
                            *q += x * x;
                        }
                    })?;
                }
                Ok((s1, s2))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mf = m_total as f64;
    let mut node_stats = Vec::with_capacity(nodes);
    for m in 0..nodes {
        let mut s1 = vec![0.0; npts];
        let mut s2 = vec![0.0; npts];
        for (b1, b2) in &batches {
            for z in 0..npts {
                s1[z] += b1[m][z];
                s2[z] += b2[m][z];
            }
        }
        let mean = (0..npts).map(|z| base[m][z] + s1[z] / mf).collect();
        let std_error = (0..npts)
            .map(|z| {
                if m == 0 {
                    0.0
                } else if m_total < 2 {
                    f64::INFINITY
                } else {
                    let var = ((s2[z] - s1[z] * s1[z] / mf) / (mf - 1.0)).max(0.0);
                    (var / mf).sqrt()
                }
            })
            .collect();
        node_stats.push(NodeStats { mean, std_error });
    }
    Ok(EnsembleStats {
        n,
        branches: m_total,
        nodes: node_stats,
        base,
        batch_counts: bounds.iter().map(|(lo, hi)| hi - lo).collect(),
        batch_sums: batches.into_iter().map(|(s1, _)| s1).collect(),
    })
}

/// Spectral data of the previous iterate needed to evaluate the log-weight
/// `-sum <h, dW> - 1/2 sum |h|^2 dt` of every lattice point in one sweep.
pub(crate) struct SpectralSweep {
    n: usize,
    /// Half-width of the wave-number box holding `|u|^2`.
    kmax: usize,
    k1: Vec<usize>,
    k2: Vec<usize>,
    fold: Vec<usize>,
    /// `[node][mode]` coefficients of `u1`, `u2` and `|u|^2`.
    u1: Vec<Vec<Complex64>>,
    u2: Vec<Vec<Complex64>>,
    q: Vec<Vec<Complex64>>,
    q0: Vec<f64>,
    psi_modes: Vec<(usize, usize, usize, Complex64)>,
    has_drift: bool,
    pub(crate) max_speed: f64,
}

impl SpectralSweep {
    pub(crate) fn new(prev: &PicardIterate, psi: &ScalarField) -> Result<SpectralSweep> {
        let n = prev.n();
        let kmax = n - 2;
        let width = 2 * kmax + 1;
        // half plane: k2 > 0, or k2 = 0 and k1 > 0; k1 stored with offset kmax
        let mut all: Vec<(usize, usize)> = Vec::new();
        for k2 in 0..=kmax {
            for k1o in 0..width {
                if k2 == 0 && k1o <= kmax {
                    continue;
                }
                all.push((k1o, k2));
            }
        }
        let nodes = prev.steps() + 1;
        let mut u1 = Vec::with_capacity(nodes);
        let mut u2 = Vec::with_capacity(nodes);
        let mut q = Vec::with_capacity(nodes);
        let mut q0 = Vec::with_capacity(nodes);
        let mut max_speed: f64 = 0.0;
        for field in prev.fields() {
            let u = apply_k(field)?;
            max_speed = max_speed.max(u.sup_norm());
            let a = u.c1.sample(2 * n)?;
            let b = u.c2.sample(2 * n)?;
            let sq: Vec<f64> = a
                .values()
                .iter()
                .zip(b.values())
                .map(|(x, y)| x * x + y * y)
                .collect();
            let qf = truncate_from_lattice(&GridSignal::new(2 * n, sq)?, 2 * n)?;
            let (mut c1, mut c2, mut c3) = (
                Vec::with_capacity(all.len()),
                Vec::with_capacity(all.len()),
                Vec::with_capacity(all.len()),
            );
            for &(k1o, k2) in &all {
                let k1 = k1o as i64 - kmax as i64;
                let k2 = k2 as i64;
                c1.push(u.c1.mode(k1, k2));
                c2.push(u.c2.mode(k1, k2));
                c3.push(qf.mode(k1, k2));
            }
            u1.push(c1);
            u2.push(c2);
            q.push(c3);
            q0.push(qf.mode(0, 0).re);
        }
        // keep only modes that carry a coefficient at some node
        let keep: Vec<usize> = (0..all.len())
            .filter(|&i| {
                (0..nodes).any(|m| u1[m][i] != ZERO || u2[m][i] != ZERO || q[m][i] != ZERO)
            })
            .collect();
        let select = |v: Vec<Vec<Complex64>>| -> Vec<Vec<Complex64>> {
            v.into_iter()
                .map(|row| keep.iter().map(|&i| row[i]).collect())
                .collect()
        };
        let u1 = select(u1);
        let u2 = select(u2);
        let q = select(q);
        let fold_of = |k1o: usize, k2: usize| {
            let k1 = (k1o as i64 - kmax as i64).rem_euclid(n as i64) as usize;
            let k2 = (k2 as i64).rem_euclid(n as i64) as usize;
            k1 * n + k2
        };
        let k1: Vec<usize> = keep.iter().map(|&i| all[i].0).collect();
        let k2: Vec<usize> = keep.iter().map(|&i| all[i].1).collect();
        let fold: Vec<usize> = keep.iter().map(|&i| fold_of(all[i].0, all[i].1)).collect();
        let psi_modes = all
            .iter()
            .filter_map(|&(k1o, k2)| {
                let c = psi.mode(k1o as i64 - kmax as i64, k2 as i64);
                (c != ZERO).then(|| (k1o, k2, fold_of(k1o, k2), c))
            })
            .collect();
        Ok(SpectralSweep {
            n,
            kmax,
            k1,
            k2,
            fold,
            has_drift: !keep.is_empty() || q0.iter().any(|&v| v != 0.0),
            u1,
            u2,
            q,
            q0,
            psi_modes,
            max_speed,
        })
    }

    fn phase_tables(&self, s: [f64; 2], p1: &mut [Complex64], p2: &mut [Complex64]) {
        let kmax = self.kmax as i64;
        for (i, p) in p1.iter_mut().enumerate() {
            *p = cis(2.0 * PI * (i as i64 - kmax) as f64 * s[0]);
        }
        for (i, p) in p2.iter_mut().enumerate() {
            *p = cis(2.0 * PI * i as f64 * s[1]);
        }
    }

    /// Sweeps one master path backwards and calls `emit(m, log_weight, psi_values)`
    /// for nodes `m = 1..=L`, both arguments being lattice arrays.
    pub(crate) fn run_branch(
        &self,
        path: &BrownianPath,
        nu: f64,
        emit: &mut dyn FnMut(usize, &[f64], &[f64]) -> Result<()>,
    ) -> Result<()> {
        let n = self.n;
        let npts = n * n;
        let steps = path.steps();
        let dt = path.dt();
        let sigma = (2.0 * nu).sqrt();
        let values = path.values();
        let incs = path.increments();
        let s_at = |v: usize| [sigma * values[v][0], sigma * values[v][1]];

        let width = 2 * self.kmax + 1;
        let mut p1 = vec![ZERO; width];
        let mut p2 = vec![ZERO; self.kmax + 1];
        self.phase_tables(s_at(steps), &mut p1, &mut p2);
        let psi_end: Vec<Complex64> = self
            .psi_modes
            .iter()
            .map(|&(a, b, _, c)| c * p1[a] * p2[b])
            .collect();

        let fft = Fft2::new(n);
        let mut gamma = vec![ZERO; self.k1.len()];
        let mut gamma0 = 0.0;
        let mut acc_l = vec![ZERO; npts];
        let mut acc_p = vec![ZERO; npts];
        let mut buf = vec![ZERO; npts];
        let mut lambda = vec![0.0; npts];
        let mut psi_vals = vec![0.0; npts];
        let neg: Vec<usize> = (0..npts)
            .map(|j| ((n - j / n) % n) * n + (n - j % n) % n)
            .collect();
        let cq = -dt / (4.0 * nu);

        for v in (0..steps).rev() {
            let node = steps - v;
            self.phase_tables(s_at(v), &mut p1, &mut p2);
            acc_l.iter_mut().for_each(|c| *c = ZERO);
            acc_p.iter_mut().for_each(|c| *c = ZERO);
            if self.has_drift {
                let a = -incs[v][0] / sigma;
                let b = -incs[v][1] / sigma;
                let (u1, u2, q) = (&self.u1[node], &self.u2[node], &self.q[node]);
                for i in 0..gamma.len() {
                    let e = p1[self.k1[i]] * p2[self.k2[i]];
                    let c = u1[i] * a + u2[i] * b + q[i] * cq;
                    gamma[i] += e * c;
                    acc_l[self.fold[i]] += gamma[i] * e.conj();
                }
                gamma0 += cq * self.q0[node];
            }
            for (j, &(a, b, f, _)) in self.psi_modes.iter().enumerate() {
                acc_p[f] += psi_end[j] * (p1[a] * p2[b]).conj();
            }
            for j in 0..npts {
                let l = acc_l[j] + acc_l[neg[j]].conj();
                let p = acc_p[j] + acc_p[neg[j]].conj();
                buf[j] = Complex64::new(l.re - p.im, l.im + p.re);
            }
            buf[0].re += gamma0;
            fft.inverse(&mut buf);
            for j in 0..npts {
                lambda[j] = if self.has_drift { buf[j].re } else { 0.0 };
                psi_vals[j] = buf[j].im;
            }
            emit(node, &lambda, &psi_vals)?;
        }
        Ok(())
    }
}
