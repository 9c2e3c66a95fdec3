//! Monte Carlo experiments. Each one loops over the L grid, runs independent trials on
//! their own random streams and reduces the results in trial order.

use std::f64::consts::{E, PI};

use statrs::distribution::{DiscreteCDF, Poisson};

use crate::config::{ExperimentConfig, ExperimentKind, GafForm, LoadedConfig};
use crate::error::{GafError, Result};
use crate::fock::{fast_decay_integral, BasisModel, BasisOptions, FrameModel, KernelModel, UnitNorms};
use crate::geometry::{Disc, Rect, Region};
use crate::measure::{doubling_ratio_scan, local_flatness_scan, RhoField, Weight, FLATNESS_LIMIT};
use crate::par::{map_indexed, Execution};
use crate::pointprocess::{make_sampling_sequence, rho_range, sample_poisson_pp, GafSample, FRAME_PAD};
use crate::rng::{stream_id, Domain};
use crate::stats::fit::{fit_hole, ols};
use crate::stats::ks::ks_standard_normal;
use crate::stats::report::{Row, SeedRange, StatReport, TrialFlag};
use crate::stats::summary::moments;
use crate::stats::testfn::TestFunction;
use crate::stats::theory::{
    ek_error_bound, ek_expected, expected_count, limit_mean, normality_conditions, poisson_moments,
    variance_theoretical,
};
use crate::zeros::{count_zeros_argument, linear_statistic, locate_zeros};

/// Fraction of flagged trials above which an L value aborts the run.
pub const MAX_FLAGGED_FRACTION: f64 = 0.05;

/// Minimum events for a probability to enter an exponent fit.
const MIN_FIT_EVENTS: u64 = 10;

/// Shared state of one run.
pub struct Ctx<'a> {
    pub cfg: &'a ExperimentConfig,
    pub weight: &'a Weight,
    pub exec: Execution,
    unit: Option<UnitNorms>,
}

impl<'a> Ctx<'a> {
    pub fn new(cfg: &'a ExperimentConfig, weight: &'a Weight, exec: Execution) -> Self {
        Ctx {
            cfg,
            weight,
            exec,
            unit: None,
        }
    }

    fn unit(&mut self) -> Result<&mut UnitNorms> {
        if self.unit.is_none() {
            self.unit = Some(UnitNorms::new(self.weight)?);
        }
        Ok(self.unit.as_mut().expect("just set"))
    }

    /// Basis model certified on the disc of radius `radius` about 0.
    pub fn basis(&mut self, l: f64, radius: f64) -> Result<BasisModel> {
        let weight = self.weight.clone();
        BasisModel::from_unit(self.unit()?, &weight, l, radius, BasisOptions::default())
    }

    /// Model of the configured form, able to produce samples on `cfg.region`.
    pub fn model(&mut self, l: f64) -> Result<KernelModel> {
        let region = self.cfg.region;
        match self.cfg.gaf_form {
            GafForm::Basis => Ok(KernelModel::Basis(self.basis(l, region.max_abs())?)),
            GafForm::Frame => {
                let field = RhoField::new(self.weight.clone(), l);
                let (_, rho_max) = rho_range(&field, &region)?;
                let window = region.padded(FRAME_PAD * rho_max * 1.01);
                let seq = make_sampling_sequence(&field, window, self.cfg.frame.delta, self.cfg.frame.covering_r)?;
                let basis = self.basis(l, window.max_abs())?;
                Ok(KernelModel::Frame(FrameModel::new(basis, seq)?))
            }
        }
    }

    /// Runs `n` trials at grid index `l_index`. Failed trials become flags; more than
    /// [`MAX_FLAGGED_FRACTION`] of them aborts.
    pub fn trials<T, F>(
        &self,
        report: &mut StatReport,
        l: f64,
        l_index: usize,
        domain: Domain,
        n: usize,
        f: F,
    ) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(u64, u64) -> Result<T> + Sync + Send,
    {
        let seed = self.cfg.seeds.master;
        let off = self.cfg.seeds.trial_offset;
        let results = map_indexed(self.exec, n, |t| {
            let stream = stream_id(domain, l_index, off + t as u64);
            (stream, f(seed, stream))
        });
        report.seeds.ranges.push(SeedRange {
            l,
            l_index,
            domain: format!("{domain:?}").to_lowercase(),
            first_stream: stream_id(domain, l_index, off),
            last_stream: stream_id(domain, l_index, off + n.saturating_sub(1) as u64),
        });
        let mut values = Vec::with_capacity(n);
        let mut flagged = 0;
        for (t, (stream, r)) in results.into_iter().enumerate() {
            match r {
                Ok(v) => values.push(v),
                Err(e) => {
                    flagged += 1;
                    report.flags.push(TrialFlag {
                        l,
                        trial: off + t as u64,
                        stream,
                        error: e.to_string(),
                    });
                }
            }
        }
        if flagged as f64 > MAX_FLAGGED_FRACTION * n as f64 {
            return Err(GafError::TooManyFlagged {
                flagged,
                trials: n,
                l,
            });
        }
        Ok(values)
    }
}

/// Zero-location tolerance: `1e-10 rho_L` at the region centre.
pub fn zero_tolerance(model: &KernelModel, region: &Rect) -> Result<f64> {
    Ok(1e-10 * model.rho_field().rho(region.center())?)
}

/// `n(psi, L)` for one sample.
pub fn linear_statistic_trial(
    model: &KernelModel,
    psi: &TestFunction,
    region: &Rect,
    tol: f64,
    seed: u64,
    stream: u64,
) -> Result<f64> {
    let g = GafSample::sample(model, seed, stream, region)?;
    let zs = locate_zeros(&g, &Region::Disc(psi.support()), tol)?;
    linear_statistic(&zs, psi, model.l())
}

/// Zero count in `disc` for one sample.
pub fn count_trial(model: &KernelModel, disc: &Disc, region: &Rect, seed: u64, stream: u64) -> Result<usize> {
    let g = GafSample::sample(model, seed, stream, region)?;
    count_zeros_argument(&g, disc)
}

/// Poisson count in `disc` with intensity `s L dmu`.
pub fn poisson_count_trial(field: &RhoField, disc: &Disc, s: f64, seed: u64, stream: u64) -> Result<usize> {
    let pts = sample_poisson_pp(field, &disc.bounding_rect(), s, seed, stream)?;
    Ok(pts.iter().filter(|p| disc.contains(**p)).count())
}

/// Flat-weight hole law `log p ~ -(e^2/4) L^2 r^4`.
pub fn flat_hole_log_p(l: f64, r: f64) -> f64 {
    -0.25 * E * E * l * l * r.powi(4)
}

/// Radius whose predicted flat hole log-probability at `l_top` is `target_log_p`.
pub fn flat_hole_radius(l_top: f64, target_log_p: f64) -> f64 {
    (-4.0 * target_log_p / (E * E * l_top * l_top)).powf(0.25)
}

/// `P(|N/m - 1| > delta)` for `N ~ Poisson(m)`.
pub fn poisson_deviation_probability(m: f64, delta: f64) -> f64 {
    let p = Poisson::new(m).expect("positive mean");
    let hi = (m * (1.0 + delta)).floor() as u64;
    let upper = p.sf(hi);
    let lower = if delta < 1.0 {
        let lo = (m * (1.0 - delta)).ceil() as u64;
        if lo == 0 {
            0.0
        } else {
            p.cdf(lo - 1)
        }
    } else {
        0.0
    };
    upper + lower
}

/// Chernoff bound `exp(-m h(delta)) + exp(-m h(-delta))`, `h(x) = (1+x) ln(1+x) - x`.
/// The lower tail is empty once `delta >= 1`.
pub fn poisson_chernoff(m: f64, delta: f64) -> f64 {
    let h = |x: f64| (1.0 + x) * (1.0 + x).ln() - x;
    let lower = if delta < 1.0 { (-m * h(-delta)).exp() } else { 0.0 };
    (-m * h(delta)).exp() + lower
}

/// Dispatches on `config.experiment`.
pub fn run(loaded: &LoadedConfig, exec: Execution) -> Result<StatReport> {
    let cfg = &loaded.config;
    let mut report = StatReport::new(cfg, &loaded.hash, loaded.weight.label());
    let mut ctx = Ctx::new(cfg, &loaded.weight, exec);
    match cfg.experiment {
        ExperimentKind::MeanVariance => mean_variance(&mut ctx, &mut report)?,
        ExperimentKind::Hole => hole(&mut ctx, &mut report)?,
        ExperimentKind::LargeDeviation => large_deviation(&mut ctx, &mut report)?,
        ExperimentKind::Normality => normality(&mut ctx, &mut report)?,
        ExperimentKind::KernelDiagnostics => kernel_diagnostics(&mut ctx, &mut report)?,
        ExperimentKind::PoissonBaseline => poisson_baseline(&mut ctx, &mut report)?,
    }
    if matches!(loaded.weight, Weight::RealPartSquare) && cfg.gaf_form == GafForm::Frame {
        report
            .notes
            .push("approximate-kernel: frame kernel for a non-radial weight".into());
    }
    Ok(report)
}

fn psi_of(cfg: &ExperimentConfig) -> Result<TestFunction> {
    cfg.psi.ok_or_else(|| GafError::config("psi", "required by this experiment"))
}

fn disc_of(cfg: &ExperimentConfig) -> Result<Disc> {
    cfg.disc.ok_or_else(|| GafError::config("disc", "required by this experiment"))
}

fn ln_fit(report: &mut StatReport, name: &str, x: &[f64], y: &[f64]) {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| a.is_finite() && b.is_finite())
        .map(|(a, b)| (*a, *b))
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    if let Some(f) = ols(&xs, &ys) {
        report.add_fit(name, &f);
    }
}

fn mean_variance(ctx: &mut Ctx, report: &mut StatReport) -> Result<()> {
    let cfg = ctx.cfg;
    let psi = psi_of(cfg)?;
    let limit = limit_mean(ctx.weight, &psi);
    report.diagnostics.insert("limit_mean".into(), limit);
    let s_gaf = 1.0 / (2.0 * PI);
    if cfg.gaf_form == GafForm::Frame {
        report
            .notes
            .push("theory_mean and theory_var use the basis kernel".into());
    }
    let (mut ln_l, mut ln_var, mut inv_l, mut abs_err) = (vec![], vec![], vec![], vec![]);
    for (i, &l) in cfg.l_grid.iter().enumerate() {
        let model = ctx.model(l)?;
        let tol = zero_tolerance(&model, &cfg.region)?;
        let values = ctx.trials(report, l, i, Domain::Coefficients, cfg.trials, |seed, stream| {
            linear_statistic_trial(&model, &psi, &cfg.region, tol, seed, stream)
        })?;
        let m = moments(&values);
        let theory_model = KernelModel::Basis(model.basis().clone());
        let ek = ek_expected(&theory_model, &psi)?;
        let var = variance_theoretical(&theory_model, &psi)?;
        let (_, pois_var) = poisson_moments(ctx.weight, &psi, l, s_gaf);
        let mut row = Row::new(l);
        row.trials = cfg.trials;
        row.flagged = cfg.trials - values.len();
        row.mean = Some(m.mean);
        row.var = Some(m.var);
        row.theory_mean = Some(ek);
        row.theory_var = Some(var.exact);
        row.set("std_err", m.std_err());
        row.set("limit_mean", limit);
        row.set("mean_minus_limit", m.mean - limit);
        row.set("mean_bound", ek_error_bound(&theory_model, &psi)?);
        row.set("surrogate_var", var.surrogate);
        row.set("theory_var_ratio", var.ratio());
        row.set("poisson_var", pois_var);
        row.set("var_ratio_gaf_poisson", m.var / pois_var);
        report.rows.push(row);
        ln_l.push(l.ln());
        ln_var.push(m.var.ln());
        inv_l.push(1.0 / l);
        abs_err.push((m.mean - limit).abs());
    }
    ln_fit(report, "variance_exponent", &ln_l, &ln_var);
    ln_fit(report, "mean_error_vs_inv_l", &inv_l, &abs_err);
    let surr: Vec<f64> = report.rows.iter().map(|r| r.get("surrogate_var").unwrap_or(f64::NAN).ln()).collect();
    ln_fit(report, "surrogate_exponent", &ln_l, &surr);
    Ok(())
}

fn poisson_baseline(ctx: &mut Ctx, report: &mut StatReport) -> Result<()> {
    let cfg = ctx.cfg;
    let psi = psi_of(cfg)?;
    let s = cfg.poisson.intensity_scale;
    let rect = psi.support().bounding_rect();
    for (i, &l) in cfg.l_grid.iter().enumerate() {
        let field = RhoField::new(ctx.weight.clone(), l);
        let values = ctx.trials(report, l, i, Domain::Poisson, cfg.trials, |seed, stream| {
            let pts = sample_poisson_pp(&field, &rect, s, seed, stream)?;
            Ok(pts.iter().map(|p| psi.value(*p)).sum::<f64>() / l)
        })?;
        let m = moments(&values);
        let (tm, tv) = poisson_moments(ctx.weight, &psi, l, s);
        let mut row = Row::new(l);
        row.trials = cfg.trials;
        row.flagged = cfg.trials - values.len();
        row.mean = Some(m.mean);
        row.var = Some(m.var);
        row.theory_mean = Some(tm);
        row.theory_var = Some(tv);
        row.set("std_err", m.std_err());
        row.set("rel_err_mean", (m.mean - tm).abs() / tm.abs());
        row.set("rel_err_var", (m.var - tv).abs() / tv.abs());
        report.rows.push(row);
    }
    Ok(())
}

fn hole(ctx: &mut Ctx, report: &mut StatReport) -> Result<()> {
    let cfg = ctx.cfg;
    let disc = disc_of(cfg)?;
    let s = cfg.poisson.intensity_scale;
    let flat = ctx.weight.constant_density() == Some(2.0);
    let mu = ctx.weight.mu_disc_unit(disc.center, disc.radius)?;
    if flat {
        report
            .diagnostics
            .insert("c_reference".into(), 0.25 * E * E * disc.radius.powi(4));
    }
    let (mut ls, mut holes, mut trials) = (vec![], vec![], vec![]);
    for (i, &l) in cfg.l_grid.iter().enumerate() {
        let model = ctx.model(l)?;
        let counts = ctx.trials(report, l, i, Domain::Coefficients, cfg.trials, |seed, stream| {
            count_trial(&model, &disc, &cfg.region, seed, stream)
        })?;
        let n = counts.len() as u64;
        let k = counts.iter().filter(|c| **c == 0).count() as u64;
        let p = k as f64 / n as f64;
        let mut row = Row::new(l);
        row.trials = cfg.trials;
        row.flagged = cfg.trials - counts.len();
        row.mean = Some(p);
        row.set("holes", k as f64);
        row.set("p_hat", p);
        row.set("log_p", if k > 0 { p.ln() } else { f64::NEG_INFINITY });
        if k > 0 {
            row.set("se_log_p", ((1.0 - p) / (n as f64 * p)).sqrt());
        } else {
            row.set("p_upper_95", 3.0 / n as f64);
        }
        if flat {
            row.set("predicted_log_p", flat_hole_log_p(l, disc.radius));
        }
        let pois = (-s * l * mu).exp();
        row.set("poisson_p", pois);
        if cfg.poisson.simulate {
            let field = RhoField::new(ctx.weight.clone(), l);
            let pc = ctx.trials(report, l, i, Domain::Poisson, cfg.trials, |seed, stream| {
                poisson_count_trial(&field, &disc, s, seed, stream)
            })?;
            let pk = pc.iter().filter(|c| **c == 0).count() as f64;
            let pn = pc.len() as f64;
            row.set("poisson_p_hat", pk / pn);
            row.set("poisson_sigma", (pois * (1.0 - pois) / pn).sqrt());
        }
        report.rows.push(row);
        ls.push(l);
        holes.push(k);
        trials.push(n);
    }
    for (l, k) in ls.iter().zip(&holes) {
        if *k < MIN_FIT_EVENTS {
            report
                .notes
                .push(format!("L = {l}: {k} hole events, left out of the fit"));
        }
    }
    match fit_hole(&ls, &holes, &trials) {
        Ok(f) => report.add_fit("hole", &f),
        Err(e) => report.notes.push(e.to_string()),
    }
    // growth exponent of -log p in L; 2 or more means at least quadratic decay
    let (x, y): (Vec<f64>, Vec<f64>) = report
        .rows
        .iter()
        .filter(|r| r.get("holes").unwrap_or(0.0) >= MIN_FIT_EVENTS as f64)
        .map(|r| (r.l.ln(), (-r.get("log_p").unwrap()).ln()))
        .unzip();
    ln_fit(report, "neg_log_p_exponent", &x, &y);
    Ok(())
}

fn large_deviation(ctx: &mut Ctx, report: &mut StatReport) -> Result<()> {
    let cfg = ctx.cfg;
    let disc = disc_of(cfg)?;
    let delta = cfg.deviation_delta;
    let s = cfg.poisson.intensity_scale;
    let mu = ctx.weight.mu_disc_unit(disc.center, disc.radius)?;
    let (mut ln_l, mut gaf_y, mut pois_y, mut probs) = (vec![], vec![], vec![], vec![]);
    for (i, &l) in cfg.l_grid.iter().enumerate() {
        let model = ctx.model(l)?;
        let m = l * mu / (2.0 * PI);
        let counts = ctx.trials(report, l, i, Domain::Coefficients, cfg.trials, |seed, stream| {
            count_trial(&model, &disc, &cfg.region, seed, stream)
        })?;
        let n = counts.len() as f64;
        let dev = |c: &usize| (*c as f64 / m - 1.0).abs() > delta;
        let k = counts.iter().filter(|c| dev(c)).count();
        let p = k as f64 / n;
        let cm = moments(&counts.iter().map(|c| *c as f64).collect::<Vec<_>>());
        let mut row = Row::new(l);
        row.trials = cfg.trials;
        row.flagged = cfg.trials - counts.len();
        row.mean = Some(cm.mean);
        row.var = Some(cm.var);
        row.theory_mean = Some(expected_count(&KernelModel::Basis(model.basis().clone()), &disc)?);
        row.set("events", k as f64);
        row.set("p_hat", p);
        if k == 0 {
            row.set("p_upper_95", 3.0 / n);
        }
        let pm = s * l * mu;
        let exact = poisson_deviation_probability(pm, delta);
        row.set("poisson_mean", pm);
        row.set("poisson_p", exact);
        row.set("poisson_chernoff", poisson_chernoff(pm, delta));
        if cfg.poisson.simulate {
            let field = RhoField::new(ctx.weight.clone(), l);
            let pc = ctx.trials(report, l, i, Domain::Poisson, cfg.trials, |seed, stream| {
                poisson_count_trial(&field, &disc, s, seed, stream)
            })?;
            let pk = pc.iter().filter(|c| (**c as f64 / pm - 1.0).abs() > delta).count();
            row.set("poisson_p_hat", pk as f64 / pc.len() as f64);
        }
        report.rows.push(row);
        ln_l.push(l.ln());
        gaf_y.push(if k as u64 >= MIN_FIT_EVENTS { (-p.ln()).ln() } else { f64::NAN });
        pois_y.push((-exact.ln()).ln());
        probs.push(p);
    }
    ln_fit(report, "gaf_exponent", &ln_l, &gaf_y);
    ln_fit(report, "poisson_exponent", &ln_l, &pois_y);
    let decreasing = probs.windows(2).all(|w| w[1] < w[0] || w[0] == 0.0);
    report
        .diagnostics
        .insert("gaf_monotone_decreasing".into(), if decreasing { 1.0 } else { 0.0 });
    if let (Some(e), Some(se)) = (
        report.fit_field("gaf_exponent", "slope"),
        report.fit_field("gaf_exponent", "slope_se"),
    ) {
        let q = e + 2.0 * se >= 2.0;
        report
            .diagnostics
            .insert("gaf_at_least_quadratic".into(), if q { 1.0 } else { 0.0 });
    }
    Ok(())
}

fn normality(ctx: &mut Ctx, report: &mut StatReport) -> Result<()> {
    let cfg = ctx.cfg;
    let psi = psi_of(cfg)?;
    let scan = local_flatness_scan(ctx.weight, &cfg.region)?;
    report.diagnostics.insert("flatness_min_ratio".into(), scan.min_ratio);
    report.diagnostics.insert("flatness_max_ratio".into(), scan.max_ratio);
    if !scan.is_flat() {
        return Err(GafError::NotLocallyFlat {
            band: scan.band(),
            limit: FLATNESS_LIMIT,
        });
    }
    let (mut ln_l, mut sup) = (vec![], vec![]);
    for (i, &l) in cfg.l_grid.iter().enumerate() {
        let model = ctx.model(l)?;
        let tol = zero_tolerance(&model, &cfg.region)?;
        let values = ctx.trials(report, l, i, Domain::Coefficients, cfg.trials, |seed, stream| {
            linear_statistic_trial(&model, &psi, &cfg.region, tol, seed, stream)
        })?;
        let m = moments(&values);
        let sd = m.var.sqrt();
        let z: Vec<f64> = values.iter().map(|v| (v - m.mean) / sd).collect();
        let ks = ks_standard_normal(&z);
        let nc = normality_conditions(&KernelModel::Basis(model.basis().clone()), &psi)?;
        let mut row = Row::new(l);
        row.trials = cfg.trials;
        row.flagged = cfg.trials - values.len();
        row.mean = Some(m.mean);
        row.var = Some(m.var);
        row.set("ks_d", ks.d);
        row.set("ks_p", ks.p_value);
        row.set("skewness", m.skewness);
        row.set("excess_kurtosis", m.excess_kurtosis);
        row.set("sup_integral", nc.sup_integral);
        row.set("sup_sq_integral", nc.sup_sq_integral);
        row.set("ratio_liminf_proxy", nc.ratio_liminf_proxy);
        report.rows.push(row);
        ln_l.push(l.ln());
        sup.push(nc.sup_integral.ln());
    }
    ln_fit(report, "sup_integral_exponent", &ln_l, &sup);
    Ok(())
}

fn kernel_diagnostics(ctx: &mut Ctx, report: &mut StatReport) -> Result<()> {
    let cfg = ctx.cfg;
    let d = &cfg.diagnostics;
    let z0 = cfg.region.center();
    let unit = RhoField::new(ctx.weight.clone(), 1.0);
    let rho1 = unit.rho(z0)?;
    // an empty fast-decay list skips those integrals and their larger domain
    let reach = match d.fast_decay_big_r.iter().copied().reduce(f64::max) {
        Some(big_r_max) => z0.norm() + (big_r_max + d.fast_decay_r + 1.0) * rho1,
        None => 0.0,
    };
    let grid = cfg.region.grid(d.grid, d.grid);

    let doubling = doubling_ratio_scan(ctx.weight, &cfg.region, &[0.25, 0.5, 1.0])?;
    report.diagnostics.insert("doubling_max_ratio".into(), doubling.max_ratio);
    let flat = local_flatness_scan(ctx.weight, &cfg.region)?;
    report.diagnostics.insert("flatness_min_ratio".into(), flat.min_ratio);
    report.diagnostics.insert("flatness_max_ratio".into(), flat.max_ratio);

    let mut bands = [f64::INFINITY, 0.0, f64::INFINITY, 0.0];
    let mut series: Vec<Vec<f64>> = vec![Vec::new(); d.fast_decay_big_r.len()];
    let mut ls = Vec::new();
    for &l in &cfg.l_grid {
        // the fast-decay integrand falls like exp(-c L d^2); 16 rho_L past the cut-off is enough
        let rho_l = RhoField::new(ctx.weight.clone(), l).rho(z0)?;
        let radius = (cfg.region.max_abs() + rho_l).max(reach + 16.0 * rho_l);
        let model = ctx.basis(l, radius)?;
        let vals = map_indexed(ctx.exec, grid.len(), |i| -> Result<(f64, f64)> {
            let z = grid[i];
            let diag = model.log_weighted_diag(z)?.exp();
            let rho = model.rho_field().rho(z)?;
            Ok((diag, model.kernel_log_laplacian(z)? * rho * rho))
        });
        let mut b = [f64::INFINITY, 0.0, f64::INFINITY, 0.0];
        for v in vals {
            let (diag, lap) = v?;
            b[0] = b[0].min(diag);
            b[1] = b[1].max(diag);
            b[2] = b[2].min(lap);
            b[3] = b[3].max(lap);
        }
        let mut row = Row::new(l);
        row.set("diag_min", b[0]);
        row.set("diag_max", b[1]);
        row.set("lap_min", b[2]);
        row.set("lap_max", b[3]);
        row.set("n_terms", model.n_terms() as f64);
        for (j, &big_r) in d.fast_decay_big_r.iter().enumerate() {
            let fd = fast_decay_integral(&model, z0, d.fast_decay_r, big_r)?;
            row.set(&format!("fast_decay_R{big_r}"), fd.value);
            series[j].push(fd.value.ln());
        }
        report.rows.push(row);
        ls.push(l);
        bands[0] = bands[0].min(b[0]);
        bands[1] = bands[1].max(b[1]);
        bands[2] = bands[2].min(b[2]);
        bands[3] = bands[3].max(b[3]);
    }
    report.diagnostics.insert("diag_band_min".into(), bands[0]);
    report.diagnostics.insert("diag_band_max".into(), bands[1]);
    report.diagnostics.insert("lap_band_min".into(), bands[2]);
    report.diagnostics.insert("lap_band_max".into(), bands[3]);
    for (j, &big_r) in d.fast_decay_big_r.iter().enumerate() {
        ln_fit(report, &format!("fast_decay_R{big_r}"), &ls, &series[j]);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hole_radius_round_trip() {
        let r = flat_hole_radius(20.0, -8.0);
        assert!((flat_hole_log_p(20.0, r) + 8.0).abs() < 1e-12);
    }

    #[test]
    fn poisson_tail_against_direct_sum() {
        let m: f64 = 12.5;
        let delta = 0.3;
        let mut direct = 0.0;
        let mut pk = (-m).exp();
        for k in 0..200u64 {
            if k > 0 {
                pk *= m / k as f64;
            }
            if (k as f64 / m - 1.0).abs() > delta {
                direct += pk;
            }
        }
        assert!((poisson_deviation_probability(m, delta) - direct).abs() < 1e-12);
        assert!(poisson_chernoff(m, delta) >= direct);
    }
}
