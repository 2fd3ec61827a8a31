//! Pseudospectra, Kreiss constant estimates, the κ(V) precursor window and
//! the exceptional-point distance probe.
//!
//! Everything here is built on `σ_min(zI − J)`, the reciprocal of the
//! resolvent norm. The ε-pseudospectrum is the sublevel set
//! `{z : σ_min(zI − J) < ε}`.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, resolvent_sigma_min, DenseMatrix, EigenDecomposition, LinalgError, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PseudospecError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("empty range [{0}, {1}]")]
    EmptyRange(f64, f64),
    #[error("grid resolution must be at least 2 per axis (got {0}x{1})")]
    Resolution(usize, usize),
    #[error("epsilon must be positive (got {0})")]
    Epsilon(f64),
    #[error("the ε-pseudospectrum touches the grid edge; enlarge the domain")]
    DomainTooSmall,
    #[error("no grid node lies inside the ε-pseudospectrum; refine the grid")]
    NoNodeInside,
    #[error("spectral radius {0} is not below 1, the Kreiss supremum diverges")]
    Diverging(f64),
    #[error("degenerate Kreiss search grid: {0}")]
    DegenerateSearch(String),
    #[error("epsilons must be a decreasing geometric sequence of at least 4 values")]
    EpsilonSequence,
    #[error("center is not inside the pseudospectrum for ε = {0:e}")]
    Bracket(f64),
}

/// Rectangular sampling region in the complex plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub re_range: (f64, f64),
    pub im_range: (f64, f64),
    /// Node counts along the real and imaginary axes.
    pub resolution: (usize, usize),
}

impl GridSpec {
    /// Square grid of half-width `half_width` around `center`.
    pub fn square(center: C64, half_width: f64, nodes: usize) -> Self {
        Self {
            re_range: (center.re - half_width, center.re + half_width),
            im_range: (center.im - half_width, center.im + half_width),
            resolution: (nodes, nodes),
        }
    }

    fn validate(&self) -> Result<(), PseudospecError> {
        for (lo, hi) in [self.re_range, self.im_range] {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(PseudospecError::EmptyRange(lo, hi));
            }
        }
        let (nr, ni) = self.resolution;
        if nr < 2 || ni < 2 {
            return Err(PseudospecError::Resolution(nr, ni));
        }
        Ok(())
    }

    pub fn spacing(&self) -> (f64, f64) {
        let (nr, ni) = self.resolution;
        (
            (self.re_range.1 - self.re_range.0) / (nr - 1) as f64,
            (self.im_range.1 - self.im_range.0) / (ni - 1) as f64,
        )
    }

    pub fn node(&self, i_re: usize, i_im: usize) -> C64 {
        let (dx, dy) = self.spacing();
        C64::new(
            self.re_range.0 + i_re as f64 * dx,
            self.im_range.0 + i_im as f64 * dy,
        )
    }
}

/// `σ_min(zI − J)` sampled on a [`GridSpec`], real index fastest.
#[derive(Debug, Clone)]
pub struct PseudospectrumGrid {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

impl PseudospectrumGrid {
    pub fn value(&self, i_re: usize, i_im: usize) -> f64 {
        self.values[i_im * self.spec.resolution.0 + i_re]
    }

    /// Membership mask of the ε-pseudospectrum, same layout as `values`.
    pub fn sublevel(&self, epsilon: f64) -> Vec<bool> {
        self.values.iter().map(|&v| v < epsilon).collect()
    }

    pub fn nodes(&self) -> impl Iterator<Item = (C64, f64)> + '_ {
        let (nr, _) = self.spec.resolution;
        self.values
            .iter()
            .enumerate()
            .map(move |(k, &v)| (self.spec.node(k % nr, k / nr), v))
    }

    /// CSV with header `re,im,sigma_min`, one row per node.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["re", "im", "sigma_min"])?;
        for (z, v) in self.nodes() {
            w.write_record([z.re.to_string(), z.im.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn pseudospectrum(j: &DenseMatrix, spec: GridSpec) -> Result<PseudospectrumGrid, PseudospecError> {
    spec.validate()?;
    if !j.is_square() {
        return Err(LinalgError::NotSquare {
            rows: j.rows(),
            cols: j.cols(),
        }
        .into());
    }
    let (nr, ni) = spec.resolution;
    let mut values = Vec::with_capacity(nr * ni);
    for i_im in 0..ni {
        for i_re in 0..nr {
            values.push(resolvent_sigma_min(j, spec.node(i_re, i_im)));
        }
    }
    Ok(PseudospectrumGrid { spec, values })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadiusEstimate {
    pub value: f64,
    /// Half-diagonal of one grid cell.
    pub uncertainty: f64,
}

/// Largest `|z|` over grid nodes inside the ε-pseudospectrum.
pub fn pseudospectral_radius(
    j: &DenseMatrix,
    epsilon: f64,
    spec: GridSpec,
) -> Result<RadiusEstimate, PseudospecError> {
    if !(epsilon > 0.0) {
        return Err(PseudospecError::Epsilon(epsilon));
    }
    let grid = pseudospectrum(j, spec)?;
    radius_from_grid(&grid, epsilon)
}

pub fn radius_from_grid(grid: &PseudospectrumGrid, epsilon: f64) -> Result<RadiusEstimate, PseudospecError> {
    let (nr, ni) = grid.spec.resolution;
    let mut best: Option<f64> = None;
    for i_im in 0..ni {
        for i_re in 0..nr {
            if grid.value(i_re, i_im) < epsilon {
                if i_re == 0 || i_im == 0 || i_re == nr - 1 || i_im == ni - 1 {
                    return Err(PseudospecError::DomainTooSmall);
                }
                let r = grid.spec.node(i_re, i_im).norm();
                best = Some(best.map_or(r, |b: f64| b.max(r)));
            }
        }
    }
    let (dx, dy) = grid.spec.spacing();
    best.map(|value| RadiusEstimate {
        value,
        uncertainty: 0.5 * dx.hypot(dy),
    })
    .ok_or(PseudospecError::NoNodeInside)
}

/// Discretization used by [`kreiss_constant`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KreissSearch {
    pub radial: usize,
    pub angular: usize,
    pub refine_iters: usize,
    /// Innermost and outermost radii of the coarse annulus.
    pub r_min: f64,
    pub r_max: f64,
}

/// Certified lower bound on the Kreiss constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KreissEstimate {
    pub value: f64,
    /// `None` when the best value found is the `|z| → ∞` limit of 1.
    pub argmax: Option<C64>,
    pub search: KreissSearch,
}

fn kreiss_objective(j: &DenseMatrix, z: C64) -> f64 {
    let s = resolvent_sigma_min(j, z);
    if s > 0.0 {
        (z.norm() - 1.0) / s
    } else {
        f64::INFINITY
    }
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Lower-bound estimate of `sup_{|z|>1} (|z| − 1)·‖(zI − J)⁻¹‖`.
///
/// The coarse polar grid covers `1 < |z| ≤ 1 + 10(1 − ρ)` with radii spaced
/// geometrically in `|z| − 1`. The best few coarse nodes are refined by
/// golden-section search on the radius followed by a shrinking angular
/// sweep. The `|z| → ∞` limit, where the objective tends to 1, seeds the
/// estimate. The returned value never decreases across refinement rounds.
pub fn kreiss_constant(
    j: &DenseMatrix,
    radial: usize,
    angular: usize,
    refine_iters: usize,
) -> Result<KreissEstimate, PseudospecError> {
    if radial < 2 || angular < 4 {
        return Err(PseudospecError::DegenerateSearch(format!(
            "radial = {radial} (needs ≥ 2), angular = {angular} (needs ≥ 4)"
        )));
    }
    let rho = linalg::eig(j)?.spectral_radius;
    if rho >= 1.0 {
        return Err(PseudospecError::Diverging(rho));
    }
    let gap = 1.0 - rho;
    let (lo, hi) = ((gap * 1e-3).ln(), (gap * 10.0).ln());
    let offsets: Vec<f64> = (0..radial)
        .map(|k| (lo + (hi - lo) * k as f64 / (radial - 1) as f64).exp())
        .collect();
    let angles: Vec<f64> = (0..angular)
        .map(|a| -std::f64::consts::PI + 2.0 * std::f64::consts::PI * a as f64 / angular as f64)
        .collect();
    let search = KreissSearch {
        radial,
        angular,
        refine_iters,
        r_min: 1.0 + offsets[0],
        r_max: 1.0 + offsets[radial - 1],
    };

    let polar = |offset: f64, angle: f64| C64::from_polar(1.0 + offset, angle);
    let mut coarse = Vec::with_capacity(radial * angular);
    for (k, &off) in offsets.iter().enumerate() {
        for (a, &ang) in angles.iter().enumerate() {
            coarse.push((kreiss_objective(j, polar(off, ang)), k, a));
        }
    }
    coarse.sort_by(|x, y| y.0.total_cmp(&x.0));

    let mut value = 1.0;
    let mut argmax = None;
    let consider = |v: f64, z: C64, value: &mut f64, argmax: &mut Option<C64>| {
        if v > *value {
            *value = v;
            *argmax = Some(z);
        }
    };
    for &(v, k, a) in coarse.iter().take(1) {
        consider(v, polar(offsets[k], angles[a]), &mut value, &mut argmax);
    }

    // Refine the three best coarse nodes that are not grid neighbours of an
    // already chosen one.
    let mut seeds: Vec<(usize, usize)> = Vec::new();
    for &(_, k, a) in &coarse {
        let near = seeds.iter().any(|&(k2, a2)| {
            let da = (a as isize - a2 as isize).rem_euclid(angular as isize);
            k.abs_diff(k2) <= 1 && (da <= 1 || da >= angular as isize - 1)
        });
        if !near {
            seeds.push((k, a));
        }
        if seeds.len() == 3 {
            break;
        }
    }

    let log_step = (hi - lo) / (radial - 1) as f64;
    for (k, a) in seeds {
        let mut log_off = offsets[k].ln();
        let mut angle = angles[a];
        let mut radial_half = log_step;
        let mut angular_half = 2.0 * std::f64::consts::PI / angular as f64;
        let mut local = kreiss_objective(j, polar(log_off.exp(), angle));
        for _ in 0..refine_iters {
            // golden-section on log(|z| − 1) at fixed angle
            let (mut x0, mut x3) = (log_off - radial_half, log_off + radial_half);
            let f = |x: f64| kreiss_objective(j, polar(x.exp(), angle));
            let mut x1 = x3 - GOLDEN * (x3 - x0);
            let mut x2 = x0 + GOLDEN * (x3 - x0);
            let (mut f1, mut f2) = (f(x1), f(x2));
            for _ in 0..40 {
                if f1 > f2 {
                    x3 = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = x3 - GOLDEN * (x3 - x0);
                    f1 = f(x1);
                } else {
                    x0 = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = x0 + GOLDEN * (x3 - x0);
                    f2 = f(x2);
                }
            }
            let (x_best, f_best) = if f1 > f2 { (x1, f1) } else { (x2, f2) };
            if f_best > local {
                log_off = x_best;
                local = f_best;
            }
            // angular sweep at the refined radius
            let sweep = 16;
            for s in 0..=sweep {
                let th = angle - angular_half + 2.0 * angular_half * s as f64 / sweep as f64;
                let v = kreiss_objective(j, polar(log_off.exp(), th));
                if v > local {
                    local = v;
                    angle = th;
                }
            }
            consider(local, polar(log_off.exp(), angle), &mut value, &mut argmax);
            radial_half *= 0.5;
            angular_half /= 8.0;
        }
        consider(local, polar(log_off.exp(), angle), &mut value, &mut argmax);
    }

    Ok(KreissEstimate {
        value,
        argmax,
        search,
    })
}

/// Precursor window from the transient bound `‖J^t‖ ≤ κ(V)·ρ^t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrecursorReport {
    pub kappa_v: f64,
    pub rho: f64,
    /// `⌈log κ(V) / log(1/ρ)⌉`; `None` unless `κ(V) > 1` and `0 < ρ < 1`
    /// with finite κ(V).
    pub t_c: Option<u64>,
    /// Whether `κ(V) > ρ^{−t}` for some integer `t ≥ 1`.
    pub amplification_possible: bool,
    /// ρ > 1: outside the hypothesis of the bound.
    pub eigenvalue_unstable: bool,
}

pub fn precursor(eig: &EigenDecomposition) -> PrecursorReport {
    precursor_from(eig.kappa_v, eig.spectral_radius)
}

pub fn precursor_from(kappa_v: f64, rho: f64) -> PrecursorReport {
    let eigenvalue_unstable = rho > 1.0;
    let t_c = (kappa_v > 1.0 && kappa_v.is_finite() && rho > 0.0 && rho < 1.0)
        .then(|| (kappa_v.ln() / (1.0 / rho).ln()).ceil() as u64);
    // ρ^{−t} is non-decreasing in t for ρ ≤ 1, so t = 1 decides.
    let amplification_possible = if eigenvalue_unstable {
        true
    } else if rho == 0.0 {
        false
    } else {
        kappa_v > 1.0 / rho
    };
    PrecursorReport {
        kappa_v,
        rho,
        t_c,
        amplification_possible,
        eigenvalue_unstable,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpProbe {
    /// Least-squares slope of `log dist` against `log ε`.
    pub exponent: f64,
    pub epsilons: Vec<f64>,
    /// Distance from the center to the ε-pseudospectrum boundary, minimized over rays.
    pub distances: Vec<f64>,
}

const PROBE_RAYS: usize = 16;

/// Measures how `dist(center, ∂Λ_ε)` scales with ε.
///
/// `epsilons` must be a strictly decreasing geometric sequence with at
/// least 4 entries. Distances are found by bisection on
/// `σ_min(zI − J) = ε` along [`PROBE_RAYS`] equally spaced rays.
pub fn ep_scaling_probe(
    j: &DenseMatrix,
    center: C64,
    epsilons: &[f64],
) -> Result<EpProbe, PseudospecError> {
    if epsilons.len() < 4 || epsilons.iter().any(|&e| !(e > 0.0)) {
        return Err(PseudospecError::EpsilonSequence);
    }
    let ratio = epsilons[1] / epsilons[0];
    if !(ratio < 1.0)
        || epsilons
            .windows(2)
            .any(|w| ((w[1] / w[0]) / ratio - 1.0).abs() > 1e-6)
    {
        return Err(PseudospecError::EpsilonSequence);
    }
    if !j.is_square() {
        return Err(LinalgError::NotSquare {
            rows: j.rows(),
            cols: j.cols(),
        }
        .into());
    }
    let at_center = resolvent_sigma_min(j, center);
    let scale = linalg::operator_norm_2(j).max(1.0);

    let mut distances = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        if !(at_center < eps) {
            return Err(PseudospecError::Bracket(eps));
        }
        let mut dist = f64::INFINITY;
        for ray in 0..PROBE_RAYS {
            let dir = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * ray as f64 / PROBE_RAYS as f64);
            let g = |r: f64| resolvent_sigma_min(j, center + dir * r) - eps;
            let mut hi = eps.min(1.0);
            let mut lo = 0.0;
            while g(hi) < 0.0 {
                lo = hi;
                hi *= 2.0;
                if hi > 1e3 * scale {
                    return Err(PseudospecError::Bracket(eps));
                }
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if g(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-14 * hi {
                    break;
                }
            }
            dist = dist.min(0.5 * (lo + hi));
        }
        distances.push(dist);
    }

    let xs: Vec<f64> = epsilons.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = distances.iter().map(|d| d.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(EpProbe {
        exponent: sxy / sxx,
        epsilons: epsilons.to_vec(),
        distances,
    })
}

/// `n` values starting at `first`, each `ratio` times the previous.
pub fn geometric_epsilons(first: f64, ratio: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| first * ratio.powi(k as i32)).collect()
}
