//! Experiment configuration, dispatch and persisted result records.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::decouple::{decoupling_gap, Event};
use crate::env::sample_environment_covering;
use crate::error::{Error, Result};
use crate::events::Geometry;
use crate::labels::{estimate_pk, label_intervals};
use crate::perc::{estimate_qk, pc_sweep, run_audit, theta_hat, AuditKind, AuditRecord};
use crate::pmf::{build_pmf, DistributionSpec, IntegerPmf};
use crate::proof::{check_k0_conditions, ladder_lower_bound, minimal_k4, pk_recursion_rhs, MultiscaleParams};
use crate::renewal::{aperiodic_lift, coupling_time, estimate_c1, stationarity_tv, CouplingOutcome, DelaySpec, Renewal, WeightFunction};
use crate::rng::derive_stream;
use crate::scales::{find_alpha_mu, inequality_csv, verify_scale_inequalities, HeightTable, ScaleTable};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Experiment {
    Stationarity { n: usize, support_cap: u64 },
    Coupling { cap: u64, delay_a: DelaySpec, delay_b: DelaySpec },
    C1 { cap: u64 },
    Scales { kmax: usize },
    Labels { k_base: usize, k_top: usize, window: u64 },
    Pk { k_base: usize, k_top: usize, cap: u64 },
    Decouple { ms: Vec<u64>, ns: Vec<u64>, cap: u64 },
    Qk { p: f64, k: usize, h0: u64 },
    Theta { p: f64, n: usize },
    Sweep { p_grid: Vec<f64>, sizes: Vec<usize> },
    ProofConstants { k0_kmax: u64, horizon: u64, c1: Option<f64>, cap: u64 },
    Audits { p_values: Vec<f64>, level: usize, h0: u64 },
}

impl Experiment {
    pub fn tag(&self) -> &'static str {
        match self {
            Experiment::Stationarity { .. } => "stationarity",
            Experiment::Coupling { .. } => "coupling",
            Experiment::C1 { .. } => "c1",
            Experiment::Scales { .. } => "scales",
            Experiment::Labels { .. } => "labels",
            Experiment::Pk { .. } => "pk",
            Experiment::Decouple { .. } => "decouple",
            Experiment::Qk { .. } => "qk",
            Experiment::Theta { .. } => "theta",
            Experiment::Sweep { .. } => "sweep",
            Experiment::ProofConstants { .. } => "proof_constants",
            Experiment::Audits { .. } => "audits",
        }
    }

    /// Default parameters for each experiment tag.
    pub fn default_for(tag: &str) -> Option<Self> {
        Some(match tag {
            "stationarity" => Experiment::Stationarity { n: 50, support_cap: 64 },
            "coupling" => Experiment::Coupling {
                cap: 1 << 20,
                delay_a: DelaySpec::Fixed { m: 0 },
                delay_b: DelaySpec::Stationary,
            },
            "c1" => Experiment::C1 { cap: 1 << 20 },
            "scales" => Experiment::Scales { kmax: 6 },
            "labels" => Experiment::Labels { k_base: 0, k_top: 2, window: 729 },
            "pk" => Experiment::Pk { k_base: 0, k_top: 3, cap: 1 << 20 },
            "decouple" => Experiment::Decouple { ms: vec![0, 5, 20], ns: vec![5, 20, 100], cap: 1 << 20 },
            "qk" => Experiment::Qk { p: 0.95, k: 0, h0: 100 },
            "theta" => Experiment::Theta { p: 0.55, n: 64 },
            "sweep" => Experiment::Sweep { p_grid: (0..=20).map(|i| 0.4 + 0.01 * i as f64).collect(), sizes: vec![32, 64] },
            "proof_constants" => Experiment::ProofConstants { k0_kmax: 10_000, horizon: 16, c1: None, cap: 1 << 20 },
            "audits" => Experiment::Audits { p_values: vec![0.7, 0.9, 0.95], level: 0, h0: 6 },
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub distribution: DistributionSpec,
    pub weight_c: f64,
    pub multiscale: MultiscaleParams,
    pub experiment: Experiment,
    pub trials: u64,
    pub master_seed: u64,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// Defaults around `experiment`. Audits get the short-gap toy law, under
    /// which the audited antecedents actually occur at toy scales.
    pub fn with_experiment(experiment: Experiment) -> Self {
        let mut cfg = Self::base(experiment);
        if matches!(cfg.experiment, Experiment::Audits { .. }) {
            cfg.distribution = DistributionSpec::Table { values: vec![1, 2, 5], weights: vec![0.6, 0.25, 0.15] };
            cfg.multiscale.beta = 0.9;
            cfg.multiscale.mu = 0.85;
            cfg.trials = 2000;
        }
        cfg
    }

    fn base(experiment: Experiment) -> Self {
        ExperimentConfig {
            distribution: DistributionSpec::BorderlineLog { c: 18.0, eps: 0.5, cutoff: 3 },
            weight_c: 2.0,
            multiscale: MultiscaleParams {
                c: 18.0,
                alpha: 0.99,
                beta: 0.995,
                mu: 0.99,
                toy_a: Some(3.0),
                height_cap: Some(0.5),
            },
            experiment,
            trials: 10_000,
            master_seed: 1,
            output_dir: PathBuf::from("out"),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        build_pmf(&self.distribution)?;
        WeightFunction::new(self.weight_c)?;
        self.multiscale.validate()?;
        if let Experiment::Sweep { p_grid, .. } | Experiment::Audits { p_values: p_grid, .. } = &self.experiment {
            if p_grid.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::OutOfRange("p values must lie in [0,1]".into()));
            }
        }
        Ok(())
    }

    /// Canonical JSON: sorted keys, shortest round-trip float formatting,
    /// output location dropped.
    pub fn canonical_json(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        if let Some(m) = v.as_object_mut() {
            m.remove("output_dir");
        }
        Ok(serde_json::to_string(&v)?)
    }

    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.canonical_json()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub value: f64,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
}

impl Metric {
    pub fn point(value: f64) -> Self {
        Metric { value, ci_lo: None, ci_hi: None }
    }

    pub fn ci(value: f64, lo: f64, hi: f64) -> Self {
        Metric { value, ci_lo: Some(lo), ci_hi: Some(hi) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub experiment: String,
    pub config_hash: String,
    /// seconds since the Unix epoch
    pub timestamp: u64,
    pub metrics: BTreeMap<String, Metric>,
    pub artifacts: Vec<String>,
    /// total violations when the experiment is an audit
    #[serde(default)]
    pub violations: Option<u64>,
}

struct Outputs {
    dir: PathBuf,
    artifacts: Vec<String>,
}

impl Outputs {
    fn write(&mut self, name: &str, body: &str) -> Result<()> {
        std::fs::write(self.dir.join(name), body)?;
        self.artifacts.push(name.to_string());
        Ok(())
    }
}

fn csv_rows<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("utf8"))
}

pub fn run(config: &ExperimentConfig) -> Result<ResultRecord> {
    config.validate()?;
    std::fs::create_dir_all(&config.output_dir)?;
    let tag = config.experiment.tag();
    let mut out = Outputs { dir: config.output_dir.clone(), artifacts: Vec::new() };
    let mut m = BTreeMap::new();
    let mut violations = None;
    let pmf = build_pmf(&config.distribution)?;
    let w = WeightFunction::new(config.weight_c)?;
    let seed = config.master_seed;
    let trials = config.trials;
    let ctx = |e: Error| Error::Config(format!("{tag}: {e}"));
    match &config.experiment {
        Experiment::Stationarity { n, support_cap } => {
            let ren = Renewal::new(pmf);
            let tv = stationarity_tv(&ren, *n, trials, *support_cap, seed)?;
            m.insert("tv".into(), Metric::point(tv));
            let d = ren.stationary()?;
            #[derive(Serialize)]
            struct Row {
                k: usize,
                lambda: f64,
            }
            let rows: Vec<Row> = d.lambda.iter().enumerate().take(*support_cap as usize + 1).map(|(k, &lambda)| Row { k, lambda }).collect();
            out.write("stationarity.csv", &csv_rows(&rows)?)?;
        }
        Experiment::Coupling { cap, delay_a, delay_b } => {
            let ren = Renewal::new(pmf);
            let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
            let mut censored = 0;
            for t in 0..trials {
                let mut s = derive_stream(seed, "coupling", t);
                match coupling_time(&ren, *delay_a, *delay_b, &mut s, *cap)? {
                    CouplingOutcome::Coupled(k) => *counts.entry(k).or_default() += 1,
                    CouplingOutcome::Censored(_) => censored += 1,
                }
            }
            let mean = counts.iter().map(|(k, c)| *k as f64 * *c as f64).sum::<f64>() / (trials - censored).max(1) as f64;
            m.insert("censored_fraction".into(), Metric::point(censored as f64 / trials.max(1) as f64));
            m.insert("mean_t_coupled".into(), Metric::point(mean));
            #[derive(Serialize)]
            struct Row {
                t: u64,
                count: u64,
            }
            let rows: Vec<Row> = counts.into_iter().map(|(t, count)| Row { t, count }).collect();
            out.write("coupling.csv", &csv_rows(&rows)?)?;
        }
        Experiment::C1 { cap } => {
            let lift = aperiodic_lift(&pmf, w)?;
            let est = estimate_c1(&Renewal::new(lift.lifted.clone()), w, trials, *cap, seed)?;
            m.insert("c1".into(), Metric::ci(est.c1, est.c1, est.c1_upper));
            m.insert("moment_rho".into(), Metric::ci(est.moment_rho.value, est.moment_rho.lower(), est.moment_rho.upper()));
            m.insert("moment_t".into(), Metric::ci(est.moment_t, est.moment_t - 1.96 * est.moment_t_se, est.moment_t + 1.96 * est.moment_t_se));
            m.insert("censor_fraction".into(), Metric::point(est.censor_fraction));
            m.insert("lift_a0".into(), Metric::point(lift.a0 as f64));
            out.write("c1.json", &serde_json::to_string_pretty(&est)?)?;
        }
        Experiment::Scales { kmax } => {
            let a = config.multiscale.a()?;
            let rows = verify_scale_inequalities(a, *kmax)?;
            let fails = rows.iter().filter(|r| r.pass == Some(false)).count();
            m.insert("A".into(), Metric::point(a));
            m.insert("failures".into(), Metric::point(fails as f64));
            out.write("inequalities.csv", &inequality_csv(&rows))?;
            let table = ScaleTable::new(a, *kmax)?;
            out.write("scales.json", &serde_json::to_string_pretty(&table)?)?;
        }
        Experiment::Labels { k_base, k_top, window } => {
            let a = config.multiscale.a()?;
            let scales = ScaleTable::new(a, *k_top + 1)?;
            let ren = Renewal::new(pmf);
            let mut s = derive_stream(seed, "labels", 0);
            let env = sample_environment_covering(&ren, *window, DelaySpec::Stationary, &mut s)?;
            let g = label_intervals(&env, &scales, *k_base, *k_top, *window)?;
            #[derive(Serialize)]
            struct Row {
                k: usize,
                i: u64,
            }
            let mut rows = Vec::new();
            for k in *k_base..=*k_top {
                m.insert(format!("bad_count_k{k}"), Metric::point(g.level(k).len() as f64));
                rows.extend(g.level(k).iter().map(|&i| Row { k, i }));
            }
            out.write("bad_intervals.csv", &csv_rows(&rows)?)?;
            let mut gaps = String::new();
            for x in &env.gaps {
                gaps.push_str(&format!("{x}\n"));
            }
            out.write("environment.txt", &format!("# delay_offset {}\n{gaps}", env.delay_offset))?;
        }
        Experiment::Pk { k_base, k_top, cap } => {
            let a = config.multiscale.a()?;
            let scales = ScaleTable::new(a, *k_top + 1)?;
            let ren = Renewal::new(pmf.clone());
            let est = estimate_pk(&ren, &scales, *k_top, *k_base, trials, seed).map_err(ctx)?;
            let c1 = estimate_c1(&ren, w, trials, *cap, seed)?;
            #[derive(Serialize)]
            struct Row {
                k: usize,
                p_hat: f64,
                ci_lo: f64,
                ci_hi: f64,
                rhs_next: f64,
            }
            let mut rows = Vec::new();
            for e in &est {
                let lk = scales.l_u64(e.k).map(|x| x as f64).unwrap_or(f64::INFINITY);
                let rhs = pk_recursion_rhs(e.p_hat + 3.0 * e.se(), c1.c1_upper, a, e.k as u64, lk, config.weight_c);
                m.insert(format!("p_hat_k{}", e.k), Metric::ci(e.p_hat, e.wilson_ci.0, e.wilson_ci.1));
                rows.push(Row { k: e.k, p_hat: e.p_hat, ci_lo: e.wilson_ci.0, ci_hi: e.wilson_ci.1, rhs_next: rhs });
            }
            m.insert("c1_upper".into(), Metric::point(c1.c1_upper));
            out.write("pk.csv", &csv_rows(&rows)?)?;
        }
        Experiment::Decouple { ms, ns, cap } => {
            let lift = aperiodic_lift(&pmf, w)?;
            let ren = Renewal::new(lift.lifted);
            let c1 = estimate_c1(&ren, w, trials, *cap, seed)?;
            let mut rows = Vec::new();
            let mut worst = f64::NEG_INFINITY;
            for &mm in ms {
                for &n in ns {
                    let r = decoupling_gap(&ren, mm, n, &Event::zero_at(mm), &Event::zero_at(mm + 2 * n), trials, seed, config.weight_c, c1.c1_upper)?;
                    worst = worst.max((r.gap - r.bound) / r.se.max(f64::MIN_POSITIVE));
                    rows.push(r);
                }
            }
            m.insert("c1_upper".into(), Metric::point(c1.c1_upper));
            m.insert("max_excess_in_se".into(), Metric::point(worst));
            out.write("decouple.csv", &csv_rows(&rows)?)?;
        }
        Experiment::Qk { p, k, h0 } => {
            let a = config.multiscale.a()?;
            let scales = ScaleTable::new(a, *k + 1)?;
            let heights = HeightTable::with_base(config.multiscale.beta, &scales, *k, config.multiscale.height_cap, *h0)?;
            let g = Geometry::new(&scales, &heights, *k)?;
            let q = estimate_qk(&Renewal::new(pmf), *p, *k, trials, seed, &scales, &g).map_err(ctx)?;
            m.insert("h_hat".into(), Metric::ci(q.h_hat.hat, q.h_hat.lo, q.h_hat.hi));
            m.insert("v_hat".into(), Metric::ci(q.v_hat.hat, q.v_hat.lo, q.v_hat.hi));
            m.insert("q_hat".into(), Metric::point(q.q_hat));
            out.write("qk.json", &serde_json::to_string_pretty(&q)?)?;
        }
        Experiment::Theta { p, n } => {
            let t = theta_hat(&Renewal::new(pmf), *p, *n, trials, seed)?;
            m.insert("theta_hat".into(), Metric::ci(t.hat, t.lo, t.hi));
        }
        Experiment::Sweep { p_grid, sizes } => {
            let table = pc_sweep(&Renewal::new(pmf), p_grid, sizes, trials, seed)?;
            for (n, c) in &table.crossings {
                m.insert(format!("crossing_n{n}"), Metric::point(c.unwrap_or(f64::NAN)));
            }
            out.write("sweep.csv", &table.to_csv()?)?;
            let series: Vec<(String, Vec<(f64, f64)>)> = sizes
                .iter()
                .map(|&n| (format!("n={n}"), table.rows.iter().filter(|r| r.n == n).map(|r| (r.p, r.theta_hat)).collect()))
                .collect();
            out.write("sweep.svg", &svg_line_plot(&series, "p", "theta_hat"))?;
        }
        Experiment::ProofConstants { k0_kmax, horizon, c1, cap } => {
            let c = config.multiscale.c;
            let am = find_alpha_mu(c)?;
            let params = MultiscaleParams { c, alpha: am.alpha, mu: am.mu, beta: (1.0 + am.mu) / 2.0, toy_a: None, height_cap: None };
            let a = params.a()?;
            let wc = WeightFunction::new(c)?;
            let lift = aperiodic_lift(&pmf, wc)?;
            let rho = crate::renewal::moment_rho_fc(&lift.lifted, wc);
            let (c1v, moment) = match (c1, &rho) {
                (Some(v), Ok(r)) => (*v, r.upper()),
                (Some(v), Err(_)) => (*v, f64::INFINITY),
                (None, _) => {
                    let e = estimate_c1(&Renewal::new(lift.lifted.clone()), wc, trials, *cap, seed)?;
                    (e.c1_upper, e.moment_rho.upper())
                }
            };
            let k0 = check_k0_conditions(&params, c1v, moment, *k0_kmax)?;
            let k4 = minimal_k4(a, am.mu, *horizon, 64)?;
            m.insert("A".into(), Metric::point(a));
            m.insert("alpha".into(), Metric::point(am.alpha));
            m.insert("mu".into(), Metric::point(am.mu));
            m.insert("margin_96".into(), Metric::point(am.margin));
            m.insert("c1_used".into(), Metric::point(c1v));
            m.insert("k0".into(), Metric::point(k0.k0.map_or(f64::NAN, |k| k as f64)));
            if let Some((k4, t)) = &k4 {
                let lad = ladder_lower_bound(a, am.mu, *k4, *horizon)?;
                m.insert("k4".into(), Metric::point(*k4 as f64));
                m.insert("ln_tail_sum".into(), Metric::point(t.ln_total));
                m.insert("ladder_lower_bound".into(), Metric::point(lad.bound));
            }
            let mut k0_small = k0.clone();
            k0_small.rows.retain(|r| r.k % 100 == 0 || Some(r.k) == k0.k0);
            out.write("k0_report.json", &serde_json::to_string_pretty(&k0_small)?)?;
        }
        Experiment::Audits { p_values, level, h0 } => {
            let a = config.multiscale.a()?;
            let scales = ScaleTable::new(a, level + 3)?;
            let heights = HeightTable::with_base(config.multiscale.beta, &scales, level + 2, config.multiscale.height_cap, *h0)?;
            let g = Geometry::new(&scales, &heights, level + 2)?;
            let ren = Renewal::new(pmf);
            let mut records: Vec<AuditRecord> = Vec::new();
            for &p in p_values {
                for kind in [AuditKind::Horizontal, AuditKind::Vertical, AuditKind::Ladder] {
                    let lvl = if kind == AuditKind::Ladder { level + 1 } else { *level };
                    let r = run_audit(kind, &ren, &scales, &g, lvl, p, trials, seed).map_err(ctx)?;
                    let name = format!("{}_p{p}", serde_json::to_value(kind)?.as_str().unwrap());
                    m.insert(format!("{name}_antecedents"), Metric::point(r.antecedent_count as f64));
                    m.insert(format!("{name}_violations"), Metric::point(r.violation_count as f64));
                    records.push(r);
                }
            }
            violations = Some(records.iter().map(|r| r.violation_count).sum());
            out.write("audits.json", &serde_json::to_string_pretty(&records)?)?;
        }
    }
    let record = ResultRecord {
        experiment: tag.to_string(),
        config_hash: config.hash()?,
        timestamp: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        metrics: m,
        artifacts: out.artifacts.clone(),
        violations,
    };
    std::fs::write(config.output_dir.join(format!("{tag}.record.json")), serde_json::to_string_pretty(&record)?)?;
    Ok(record)
}

/// Human-readable summary of every record in `dir`, and whether any audit
/// reported a violation.
pub fn report(dir: &Path) -> Result<(String, bool)> {
    let mut records = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|_| Error::NoResults(dir.display().to_string()))?;
    let mut paths: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    paths.sort();
    for p in paths {
        if p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(".record.json")) {
            let r: ResultRecord = serde_json::from_str(&std::fs::read_to_string(&p)?)?;
            records.push(r);
        }
    }
    if records.is_empty() {
        return Err(Error::NoResults(dir.display().to_string()));
    }
    let mut s = String::new();
    let mut bad = false;
    for r in &records {
        s.push_str(&format!("[{}] config {}\n", r.experiment, &r.config_hash[..12]));
        for (k, v) in &r.metrics {
            match (v.ci_lo, v.ci_hi) {
                (Some(lo), Some(hi)) => s.push_str(&format!("  {k:<32} {:>14.6e}  [{lo:.6e}, {hi:.6e}]\n", v.value)),
                _ => s.push_str(&format!("  {k:<32} {:>14.6e}\n", v.value)),
            }
        }
        if let Some(v) = r.violations {
            s.push_str(&format!("  {v} violations\n"));
            bad |= v > 0;
        }
    }
    Ok((s, bad))
}

/// Minimal SVG line plot with axis ticks.
pub fn svg_line_plot(series: &[(String, Vec<(f64, f64)>)], xlabel: &str, ylabel: &str) -> String {
    let (w, h, pad) = (640.0, 420.0, 50.0);
    let pts = series.iter().flat_map(|s| s.1.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !(x1 > x0) {
        x1 = x0 + 1.0;
    }
    if !(y1 > y0) {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
    let mut s = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"11\">\n");
    s.push_str(&format!(
        "<line x1=\"{pad}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n<line x1=\"{pad}\" y1=\"{pad}\" x2=\"{pad}\" y2=\"{b}\" stroke=\"black\"/>\n",
        b = h - pad,
        r = w - pad
    ));
    for t in 0..=5 {
        let fx = x0 + (x1 - x0) * t as f64 / 5.0;
        let fy = y0 + (y1 - y0) * t as f64 / 5.0;
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{fx:.3}</text>\n<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{fy:.3}</text>\n",
            sx(fx),
            h - pad + 15.0,
            pad - 5.0,
            sy(fy) + 4.0
        ));
    }
    s.push_str(&format!("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{xlabel}</text>\n", w / 2.0, h - 10.0));
    s.push_str(&format!("<text x=\"12\" y=\"{}\" transform=\"rotate(-90 12 {})\" text-anchor=\"middle\">{ylabel}</text>\n", h / 2.0, h / 2.0));
    for (i, (name, pts)) in series.iter().enumerate() {
        let c = colors[i % colors.len()];
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        s.push_str(&format!("<polyline fill=\"none\" stroke=\"{c}\" points=\"{}\"/>\n", path.join(" ")));
        s.push_str(&format!("<text x=\"{}\" y=\"{}\" fill=\"{c}\">{name}</text>\n", w - pad - 60.0, pad + 14.0 * i as f64));
    }
    s.push_str("</svg>\n");
    s
}

/// Renormalized law plus the weight used by the lifted chain, for callers
/// that only hold a spec.
pub fn lifted_pmf(spec: &DistributionSpec, c: f64) -> Result<IntegerPmf> {
    Ok(aperiodic_lift(&build_pmf(spec)?, WeightFunction::new(c)?)?.lifted)
}
