use anyhow::Result;
use dbar_core::bounds::{rho_grid, verify_l1, verify_l2, verify_l3, verify_taylor_lower_bound};
use dbar_core::geometry::{distance_proxy, rho, ComplexPoint};
use dbar_core::hl::{check_hl, modulus_from_g, GrowthFunction, LipschitzDomain};
use dbar_core::kernel::{verify_holomorphy, verify_lemma21};
use dbar_core::levi::{classify_superlog, verify_58};
use dbar_core::par;
use dbar_core::profiles::{asymptotic_exponent, inverse_round_trip, eval_modulus, ModulusSpec, Variant};
use dbar_core::solver::{
    gradient_bound_probe, holder_sweep, probe_point, solve, supnorm_probe, ProbeResult, SolverOptions,
};
use dbar_core::ExecMode;
use serde_json::json;

use crate::config::Config;
use crate::report::{csv, json, svg_chart, Series, SuiteReport};

/// A finished suite: its summary and the files to write.
pub struct Outcome {
    pub report: SuiteReport,
    pub files: Vec<(String, String)>,
}

impl Outcome {
    fn new(report: SuiteReport) -> Self {
        let name = format!("{}.json", report.suite);
        let body = json(&report);
        Self {
            report,
            files: vec![(name, body)],
        }
    }

    fn with(mut self, name: &str, body: String) -> Self {
        self.files.push((name.to_string(), body));
        self
    }
}

fn solver_opts(cfg: &Config) -> SolverOptions {
    SolverOptions {
        exec: cfg.exec,
        ..SolverOptions::with_tol(cfg.tol)
    }
}

pub fn run(name: &str, cfg: &Config) -> Result<Outcome> {
    match name {
        "profile" => profile(cfg),
        "solve" => solve_grid(cfg),
        "verify.kernel" => verify_kernel(cfg),
        "verify.bounds" => verify_bounds(cfg),
        "verify.hl" => verify_hl(cfg),
        "verify.levi" => verify_levi(cfg),
        "probe.gradient" => probe(cfg, false),
        "probe.supnorm" => probe(cfg, true),
        "holder" => holder(cfg),
        other => anyhow::bail!("unknown suite {other:?}"),
    }
}

fn profile(cfg: &Config) -> Result<Outcome> {
    let p = &cfg.domain.profile;
    let mut rows = Vec::new();
    let mut worst = (0.0, 0.0f64);
    for r in inverse_round_trip(p, cfg.profile.points)? {
        if r.rel_err >= worst.1 {
            worst = (r.t, r.rel_err);
        }
        rows.push(vec![r.t, r.f, r.back, r.rel_err]);
    }
    let mut report = SuiteReport::new("profile", worst.1 <= 1e-10).constant("roundtrip_max_rel_err", worst.1);
    let mut series = Vec::new();
    let mut modulus_rows = Vec::new();
    for (tag, variant) in [("case1", Variant::CaseI), ("case2", Variant::CaseII)] {
        let spec = ModulusSpec::default_for(p, variant);
        let fit = asymptotic_exponent(p, &spec)?;
        report = report
            .constant(&format!("{tag}_exponent"), fit.exponent)
            .constant(&format!("{tag}_fit_residual"), fit.residual);
        let table = dbar_core::profiles::tabulate_modulus(p, &spec, cfg.profile.modulus_points)?;
        series.push(Series {
            name: format!("{tag}: {:?} {:.4}", fit.model, fit.exponent),
            points: table.iter().map(|s| (s.mu, s.ln_f)).collect(),
        });
        let code = if variant == Variant::CaseI { 1.0 } else { 2.0 };
        modulus_rows.extend(table.iter().map(|s| vec![code, s.mu, s.ln_f]));
        report = report.constant(&format!("{tag}_model_index"), fit.model as u8 as f64);
    }
    report.worst_case = json!({ "roundtrip_t": worst.0 });
    Ok(Outcome::new(report)
        .with("profile_roundtrip.csv", csv(&["t", "F", "Fstar_of_F", "rel_err"], &rows))
        .with("profile_modulus.csv", csv(&["case", "mu", "ln_f"], &modulus_rows))
        .with(
            "profile_modulus.svg",
            svg_chart(&format!("modulus of {}", p.label()), "mu = ln(-ln d)", "ln f", &series, false, false),
        ))
}

fn solve_grid(cfg: &Config) -> Result<Outcome> {
    let spec = &cfg.domain;
    let form = cfg.solve.form.form();
    let (xe, _) = spec.z1_extent();
    let n = cfg.solve.grid;
    let mut pts = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let x1 = -xe + 2.0 * xe * (i as f64 + 0.5) / n as f64;
            let x2 = 2.0 * (j as f64 + 0.5) / n as f64;
            let z = ComplexPoint::from_reals(x1, 0.0, x2, 0.0);
            if rho(spec, &z) < 0.0 && distance_proxy(spec, &z).map_or(false, |d| d >= cfg.solve.min_dist) {
                pts.push(z);
            }
        }
    }
    let inner = SolverOptions {
        exec: ExecMode::Sequential,
        ..solver_opts(cfg)
    };
    let sols = par::map(cfg.exec, &pts, |z| solve(spec, &form, z, &inner));
    let mut rows = Vec::with_capacity(pts.len());
    let mut max_u = 0.0f64;
    let mut worst = None;
    for (z, s) in pts.iter().zip(sols) {
        let s = s?;
        if s.value.norm() >= max_u {
            max_u = s.value.norm();
            worst = Some(*z);
        }
        rows.push(vec![
            z.z1.re,
            z.z1.im,
            z.z2.re,
            z.z2.im,
            s.value.re,
            s.value.im,
            s.err_estimate,
            s.h.panels as f64,
            s.h.min_separation,
        ]);
    }
    let pass = !rows.is_empty() && max_u.is_finite();
    let report = SuiteReport::new("solve", pass)
        .constant("points", rows.len() as f64)
        .constant("max_abs_u", max_u)
        .constant("supnorm_ratio", max_u / form.sup_norm)
        .worst(worst);
    Ok(Outcome::new(report).with(
        "solve.csv",
        csv(&["x1", "y1", "x2", "y2", "re_u", "im_u", "err_estimate", "panels", "min_separation"], &rows),
    ))
}

fn verify_kernel(cfg: &Config) -> Result<Outcome> {
    let spec = &cfg.domain;
    let l = verify_lemma21(spec, cfg.verify.samples, cfg.seed);
    let h = verify_holomorphy(spec, (cfg.verify.samples / 10).max(10), cfg.seed);
    let report = SuiteReport::new("verify.kernel", l.pass && h.pass)
        .constant("lemma_worst_violation", l.worst_violation)
        .constant("lemma_violations", l.violations as f64)
        .constant("lemma_c_best", l.c_best)
        .constant("holomorphy_max_dbar_inner", h.max_dbar_inner)
        .constant("holomorphy_max_numerator_far", h.max_numerator_far)
        .worst(l.worst_pair);
    Ok(Outcome::new(report).with("verify.kernel.details.json", json(&json!({ "lemma": l, "holomorphy": h }))))
}

fn verify_bounds(cfg: &Config) -> Result<Outcome> {
    let v = &cfg.verify;
    let p = &cfg.domain.profile;
    let l1 = verify_l1(p, v.samples, cfg.seed);
    let grid = rho_grid(v.rho_min, v.rho_max, v.rho_points);
    let l2 = verify_l2(p, &grid, v.l2_delta)?;
    let l3 = verify_l3(p, &grid, v.l3_delta)?;
    let t = verify_taylor_lower_bound(&cfg.domain, v.samples, cfg.seed);
    let pass = l1.pass && l2.pass && l3.pass && t.pass;
    let rows: Vec<Vec<f64>> = l2
        .rows
        .iter()
        .zip(&l3.rows)
        .map(|(a, b)| vec![a.rho, a.integral, a.rhs, a.ratio, b.integral, b.rhs, b.ratio])
        .collect();
    let series = vec![
        Series {
            name: "l2 ratio".into(),
            points: l2.rows.iter().map(|r| (r.rho, r.ratio)).collect(),
        },
        Series {
            name: "l3 ratio".into(),
            points: l3.rows.iter().map(|r| (r.rho, r.ratio)).collect(),
        },
    ];
    let report = SuiteReport::new("verify.bounds", pass)
        .constant("l1_min", l1.min_value)
        .constant("l2_max_ratio", l2.max_ratio)
        .constant("l2_bound", l2.bound)
        .constant("l3_max_ratio", l3.max_ratio)
        .constant("l3_bound", l3.bound)
        .constant("taylor_worst_violation", t.worst_violation)
        .worst(json!({ "l1": l1.worst, "taylor": t.worst_pair }));
    Ok(Outcome::new(report)
        .with(
            "bounds_ratios.csv",
            csv(&["rho", "l2_integral", "l2_rhs", "l2_ratio", "l3_integral", "l3_rhs", "l3_ratio"], &rows),
        )
        .with("bounds_ratios.svg", svg_chart("integral ratios", "rho", "ratio", &series, true, false)))
}

fn verify_hl(cfg: &Config) -> Result<Outcome> {
    let dom = LipschitzDomain::unit_disc();
    let g = GrowthFunction::power(0.5, 1.0)?;
    let d2 = dom.clone();
    let u = move |x: &[f64]| d2.delta(x).max(0.0).sqrt();
    let r = check_hl(&dom, &g, &u, cfg.verify.hl_pairs, cfg.seed)?;
    let p = &cfg.domain.profile;
    let gs = GrowthFunction::sqrt_fstar(p, 0.5)?;
    let mut worst_rel = 0.0f64;
    let mut rows = Vec::new();
    for d in [1e-2, 1e-5, 1e-9, 1e-20] {
        let a = modulus_from_g(&gs, d)?;
        let b = eval_modulus(p, &ModulusSpec::from_d_range(Variant::CaseI, d, d)?, d)?;
        let rel = (a - b).abs() / b;
        worst_rel = worst_rel.max(rel);
        rows.push(vec![d, a, b, rel]);
    }
    let pass = r.pass && r.ratio <= 0.5 + 1e-6 && worst_rel <= 1e-8;
    let report = SuiteReport::new("verify.hl", pass)
        .constant("disc_ratio", r.ratio)
        .constant("disc_c_grad", r.c_grad)
        .constant("disc_ratio_doubled", r.ratio_doubled)
        .constant("identity_max_rel_err", worst_rel)
        .worst(&r.worst_pair);
    Ok(Outcome::new(report).with("hl_identity.csv", csv(&["d", "from_growth", "eval_modulus", "rel_err"], &rows)))
}

fn verify_levi(cfg: &Config) -> Result<Outcome> {
    let r = verify_58(&cfg.domain, &cfg.verify.levi_deltas, cfg.verify.samples, cfg.seed)?;
    let s = classify_superlog(&cfg.domain.profile);
    let rows: Vec<Vec<f64>> = r
        .rows
        .iter()
        .map(|c| vec![c.delta, c.fstar_delta, c.samples as f64, c.min_scaled, c.max_weight])
        .collect();
    let report = SuiteReport::new("verify.levi", r.pass)
        .constant("c0", r.c0)
        .constant("cases_hold", r.cases_hold as u8 as f64)
        .constant("superlog", s.superlog as u8 as f64)
        .worst(r.rows.iter().map(|c| (c.delta, c.min_scaled)).collect::<Vec<_>>());
    Ok(Outcome::new(report)
        .with("levi_rows.csv", csv(&["delta", "fstar_delta", "samples", "min_scaled", "max_weight"], &rows))
        .with("verify.levi.details.json", json(&json!({ "levi": r, "superlog": s }))))
}

fn probe(cfg: &Config, supnorm: bool) -> Result<Outcome> {
    let spec = &cfg.domain;
    let mut list = cfg.probe.varrho.clone();
    list.sort_by(|a, b| b.total_cmp(a));
    let rows: Vec<ProbeResult> = par::map(cfg.exec, &list, |&v| {
        let z = probe_point(v);
        if supnorm {
            supnorm_probe(spec, &z)
        } else {
            gradient_bound_probe(spec, &z)
        }
    })
    .into_iter()
    .collect::<dbar_core::Result<_>>()?;
    let monotone = rows.windows(2).all(|w| w[1].lhs > w[0].lhs);
    let max = rows.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
    let min = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    let suite = if supnorm { "probe.supnorm" } else { "probe.gradient" };
    let worst = rows.iter().max_by(|a, b| a.ratio.total_cmp(&b.ratio)).copied();
    let report = SuiteReport::new(suite, monotone && max.is_finite())
        .constant("max_ratio", max)
        .constant("min_ratio", min)
        .worst(worst);
    let table: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| vec![r.z.z1.re, r.z.z1.im, r.z.z2.re, r.z.z2.im, r.varrho, r.lhs, r.rhs, r.ratio, r.panels as f64])
        .collect();
    let series = vec![
        Series {
            name: "lhs".into(),
            points: rows.iter().map(|r| (r.varrho, r.lhs)).collect(),
        },
        Series {
            name: "rhs".into(),
            points: rows.iter().map(|r| (r.varrho, r.rhs)).collect(),
        },
    ];
    let stem = suite.replace('.', "_");
    Ok(Outcome::new(report)
        .with(
            &format!("{stem}.csv"),
            csv(&["x1", "y1", "x2", "y2", "varrho", "lhs", "rhs", "ratio", "panels"], &table),
        )
        .with(&format!("{stem}.svg"), svg_chart(suite, "varrho", "value", &series, true, true)))
}

fn holder(cfg: &Config) -> Result<Outcome> {
    let h = &cfg.holder;
    let r = holder_sweep(&cfg.domain, &h.form.form(), h.bases, h.per_base, h.min_dist, cfg.seed, &solver_opts(cfg))?;
    let rows: Vec<Vec<f64>> = r
        .decades
        .iter()
        .map(|d| vec![d.sep_lo, d.sep_hi, d.pairs as f64, d.sup, d.cumulative_sup])
        .collect();
    let report = SuiteReport::new("holder", r.pass)
        .constant("sup", r.sup)
        .constant("pairs", r.pairs as f64)
        .constant("cumulative_growth", r.cumulative_growth)
        .worst(&r.decades);
    Ok(Outcome::new(report).with("holder_decades.csv", csv(&["sep_lo", "sep_hi", "pairs", "sup", "cumulative_sup"], &rows)))
}
