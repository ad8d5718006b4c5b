use std::fmt::Write as _;

use mrct_core::assessment::{one_step_only, two_step_assess, AssessmentConfig, Method};
use mrct_core::data::{load_csv, Endpoint, QuantileScope};
use mrct_core::ite::{MhatDesign, WaldCovariance};
use mrct_core::shift::RatioMode;
use mrct_core::sim::{
    believe_study, builtin_scenario, builtin_scenarios, catalog_json, estimate_cp_methods, reproduce_table,
    BelieveParams, BelieveSummary, CpResult, HazardLink, ReferenceTable, ScenarioSpec, TableResult,
};
use mrct_core::survival::PseudoScope;
use mrct_core::Stage;
use serde::Serialize;

use crate::args::{
    AnalysisArgs, AssessArgs, BelieveArgs, CutScope, Covariance, EndpointKind, Format, Hazard, Layout, MhatTerms,
    PseudoGroups, RatioKind, SimulateArgs, TablesArgs,
};
use crate::error::CliError;

fn config_from(analysis: &AnalysisArgs, q1: f64, q2: f64, region: &str) -> AssessmentConfig {
    AssessmentConfig {
        region: region.to_string(),
        q1,
        q2,
        alpha: analysis.alpha,
        alpha_interaction: analysis.alpha_interaction,
        margin: analysis.margin,
        smoothing: analysis.smoothing,
        coding: Default::default(),
        covariance: match analysis.covariance {
            Covariance::Ols => WaldCovariance::Ols,
            Covariance::Sandwich => WaldCovariance::Sandwich,
        },
        mhat_design: match analysis.mhat_design {
            MhatTerms::RegionInteractions => MhatDesign::RegionInteractions,
            MhatTerms::RegionIndicator => MhatDesign::RegionIndicator,
            MhatTerms::Additive => MhatDesign::Additive,
        },
        ratio_mode: match analysis.ratio_mode {
            RatioKind::PerCovariate => RatioMode::PerCovariate,
            RatioKind::Joint => RatioMode::Joint,
        },
        quantile_scope: match analysis.quantile_scope {
            CutScope::Pooled => QuantileScope::Pooled,
            CutScope::PerRegion => QuantileScope::PerRegion,
        },
        pseudo_scope: match analysis.pseudo_scope {
            PseudoGroups::PerArm => PseudoScope::PerArm,
            PseudoGroups::PerArmWithinRegion => PseudoScope::PerArmWithinRegion,
        },
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    s
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.4}"))
}

fn cp_csv(results: &[CpResult]) -> String {
    let mut out = String::from("method,cp,mc_se,power,reps_total,reps_significant,reps_failed,claims,seed\n");
    for r in results {
        let _ = writeln!(
            out,
            "{},{},{},{:.4},{},{},{},{},{}",
            r.method.label(),
            opt(r.cp),
            opt(r.mc_se),
            r.power,
            r.reps_total,
            r.reps_significant,
            r.reps_failed,
            r.claims,
            r.seed
        );
    }
    out
}

fn cp_text(results: &[CpResult]) -> String {
    let mut out = String::new();
    if let Some(r) = results.first() {
        let _ = writeln!(
            out,
            "power {:.4} ({} of {} replicates significant, {} failed)",
            r.power, r.reps_significant, r.reps_total, r.reps_failed
        );
    }
    for r in results {
        let _ = writeln!(out, "{:<20} CP {}  (MC SE {})", r.method.label(), opt(r.cp), opt(r.mc_se));
    }
    out
}

pub fn assess(args: &AssessArgs, format: Format) -> Result<String, CliError> {
    let endpoint = match args.endpoint {
        EndpointKind::Continuous => Endpoint::Continuous,
        EndpointKind::Binary => Endpoint::Binary,
        EndpointKind::Survival => Endpoint::Survival { tau: args.tau },
    };
    let data = load_csv(&args.data, endpoint, args.pi1).map_err(|e| e.at(Stage::Load))?;
    for note in data.notes() {
        eprintln!("warning: {note}");
    }
    let config = config_from(&args.analysis, args.thresholds.q1, args.thresholds.q2, &args.region);
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let report = if args.one_step { one_step_only(&data, &config)? } else { two_step_assess(&data, &config)? };
    Ok(match format {
        Format::Json => {
            let mut s = report.to_json();
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut buf = Vec::new();
            report.write_csv(&mut buf)?;
            String::from_utf8(buf).expect("csv is utf-8")
        }
        Format::Text => report.render_text(),
    })
}

#[derive(Serialize)]
struct SimulationOutput<'a> {
    scenario: &'a ScenarioSpec,
    results: &'a [CpResult],
}

/// The four table criteria followed by Ko(q1) and TwoStep(q1, q2) when
/// they are not already among them.
fn simulation_methods(q1: f64, q2: f64) -> Vec<Method> {
    let mut methods = Method::table_set().to_vec();
    for m in [Method::OneStep { q: q1 }, Method::TwoStep { q1, q2 }] {
        if !methods.contains(&m) {
            methods.push(m);
        }
    }
    methods
}

pub fn simulate(args: &SimulateArgs, format: Format) -> Result<String, CliError> {
    let mut spec = builtin_scenario(&args.scenario).map_err(|e| CliError::Usage(e.to_string()))?;
    spec.kappa_r = args.kappa_r;
    spec.kappa_minus_r = args.kappa_minus_r;
    spec.n_r = args.n_r;
    spec.n_minus_r = args.n_minus_r;
    spec.sigma = args.sigma;
    spec.pi1 = args.pi1;
    spec.censor_upper = args.censor_upper;
    spec.tau = args.tau;
    spec.hazard_link = match args.hazard_link {
        Hazard::LogLinear => HazardLink::LogLinear,
        Hazard::Linear => HazardLink::Linear,
    };
    spec.balanced = args.balanced;
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let config = config_from(&args.analysis, args.thresholds.q1, args.thresholds.q2, "r");
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let methods = simulation_methods(args.thresholds.q1, args.thresholds.q2);
    let results = estimate_cp_methods(&spec, &methods, &config, args.mc.reps, args.mc.seed)
        .map_err(|e| e.at(Stage::Simulation))?;
    Ok(match format {
        Format::Json => json(&SimulationOutput { scenario: &spec, results: &results }),
        Format::Csv => cp_csv(&results),
        Format::Text => format!("scenario {}\n{}", spec.name, cp_text(&results)),
    })
}

fn table_text(table: &TableResult) -> String {
    let wide = table.to_wide_csv();
    let rows: Vec<Vec<&str>> = wide.lines().map(|l| l.split(',').collect()).collect();
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in &rows {
        let cells: Vec<String> = r.iter().zip(&widths).map(|(v, w)| format!("{v:<w$}")).collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
    }
    out
}

pub fn tables(args: &TablesArgs, format: Format) -> Result<String, CliError> {
    let which: ReferenceTable = args.which.parse().map_err(|e: mrct_core::Error| CliError::Usage(e.to_string()))?;
    let config = config_from(&args.analysis, 0.9, 0.5, "r");
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let table = reproduce_table(which, args.mc.reps, args.mc.seed, &config).map_err(|e| e.at(Stage::Simulation))?;
    Ok(match (format, args.layout) {
        (Format::Json, _) => json(&table),
        (Format::Csv, Layout::Wide) => table.to_wide_csv(),
        (Format::Csv, Layout::Long) => table.to_long_csv(),
        (Format::Text, _) => table_text(&table),
    })
}

pub fn believe_params(args: &BelieveArgs) -> BelieveParams {
    let base = if args.sign_corrected { BelieveParams::sign_corrected() } else { BelieveParams::default() };
    BelieveParams {
        intercept: args.intercept.unwrap_or(base.intercept),
        treatment: args.treatment.unwrap_or(base.treatment),
        btb_treatment: args.btb_treatment.unwrap_or(base.btb_treatment),
        btb: args.btb,
        n_asian: args.n_asian,
        n_non_asian: args.n_non_asian,
        pi1: args.pi1,
        high_fraction_asian: args.high_fraction_asian,
        high_fraction_non_asian: args.high_fraction_non_asian,
        ..base
    }
}

fn believe_text(summary: &BelieveSummary) -> String {
    let p = &summary.params;
    format!(
        "response logit = {} + {}·T + {}·BTB·T + {}·BTB\n{}",
        p.intercept,
        p.treatment,
        p.btb_treatment,
        p.btb,
        cp_text(&summary.results)
    )
}

pub fn believe(args: &BelieveArgs, format: Format) -> Result<String, CliError> {
    let params = believe_params(args);
    params.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let config = config_from(&args.analysis, 0.9, 0.5, mrct_core::sim::ASIAN);
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let summary = believe_study(&params, &config, args.mc.reps, args.mc.seed).map_err(|e| e.at(Stage::Simulation))?;
    Ok(match format {
        Format::Json => json(&summary),
        Format::Csv => cp_csv(&summary.results),
        Format::Text => believe_text(&summary),
    })
}

pub fn scenarios(format: Format) -> String {
    let catalog = builtin_scenarios();
    let join = |v: &[f64]| v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(";");
    match format {
        Format::Json => {
            let mut s = catalog_json();
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut out = String::from("name,family,shift,n_r,n_minus_r,mu_r,mu_minus_r,kappa_r,kappa_minus_r\n");
            for s in &catalog {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{}",
                    s.name,
                    s.family.name(),
                    s.shift.name(),
                    s.n_r,
                    s.n_minus_r,
                    join(&s.mu_r),
                    join(&s.mu_minus_r),
                    s.kappa_r,
                    s.kappa_minus_r
                );
            }
            out
        }
        Format::Text => {
            let mut out = String::new();
            for s in &catalog {
                let _ = writeln!(out, "{:<32} mu_r ({})  mu_-r ({})", s.name, join(&s.mu_r), join(&s.mu_minus_r));
            }
            out
        }
    }
}
