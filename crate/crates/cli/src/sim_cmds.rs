use std::io::BufWriter;
use std::path::{Path, PathBuf};

use lora_capacity::netsim::{audit_trace, run_with_trace, write_trace, SimOutput};
use lora_capacity::scenario::ScenarioFile;
use lora_capacity::SimMetrics;
use rayon::prelude::*;

use crate::output::{required_scenario, seed_list};
use crate::{CliError, CliResult, Common, SimulateArgs, SweepArgs, SweepParam, SCHEMA_LINE};

fn run_one(file: &ScenarioFile, seed: u64, keep_trace: bool) -> CliResult<SimOutput> {
    let mut config = file.sim_config(seed).map_err(CliError::config)?;
    config.record_trace = keep_trace;
    run_with_trace(&config).map_err(CliError::runtime)
}

/// `trace.csv` for a single seed, `trace.seed7.csv` when several are run.
fn trace_path(base: &Path, seed: u64, several: bool) -> PathBuf {
    if !several {
        return base.to_path_buf();
    }
    let stem = base.file_stem().map_or_else(|| "trace".into(), |s| s.to_string_lossy().into_owned());
    let name = match base.extension() {
        Some(ext) => format!("{stem}.seed{seed}.{}", ext.to_string_lossy()),
        None => format!("{stem}.seed{seed}"),
    };
    base.with_file_name(name)
}

fn metrics_csv<'a>(prefix: &str, rows: impl IntoIterator<Item = (String, &'a SimMetrics)>) -> String {
    let mut out = format!("{SCHEMA_LINE}\n{prefix}{}\n", SimMetrics::CSV_HEADER);
    for (lead, m) in rows {
        for line in m.csv_rows().lines() {
            out.push_str(&lead);
            out.push_str(line);
            out.push('\n');
        }
    }
    out
}

pub(crate) fn simulate(common: &Common, args: &SimulateArgs) -> CliResult<(String, Option<PathBuf>)> {
    let file = required_scenario(common, args.scenario.as_deref())?;
    let seeds = seed_list(common, Some(&file))?;
    let trace_base = args.trace.clone().or_else(|| file.output.trace_path.clone());
    let keep_trace = trace_base.is_some() || args.audit;
    let rules = file.sim_config(seeds[0]).map_err(CliError::config)?.audit_rules();

    let outputs: Vec<CliResult<SimOutput>> = seeds.par_iter().map(|&s| run_one(&file, s, keep_trace)).collect();
    let outputs = outputs.into_iter().collect::<CliResult<Vec<_>>>()?;

    for (seed, output) in seeds.iter().zip(&outputs) {
        if args.audit {
            audit_trace(&output.trace, &rules).map_err(|v| CliError::Runtime(format!("seed {seed}: {v}")))?;
        }
        if let Some(base) = &trace_base {
            let path = trace_path(base, *seed, seeds.len() > 1);
            let f = std::fs::File::create(&path)
                .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
            write_trace(BufWriter::new(f), &output.trace).map_err(CliError::runtime)?;
        }
    }
    let csv = metrics_csv("", outputs.iter().map(|o| (String::new(), &o.metrics)));
    Ok((csv, file.output.metrics_path.clone()))
}

fn apply(file: &ScenarioFile, param: SweepParam, value: f64) -> CliResult<ScenarioFile> {
    let mut f = file.clone();
    let whole = |what: &str| -> CliResult<u64> {
        if value >= 0.0 && value.fract() == 0.0 && value <= f64::from(u32::MAX) {
            Ok(value as u64)
        } else {
            Err(CliError::Config(format!("{what} value {value} is not a whole number")))
        }
    };
    match param {
        SweepParam::Lambda => f.traffic.lambda_per_hour = value,
        SweepParam::AckFraction => f.traffic.ack_fraction = value,
        SweepParam::Devices => f.traffic.n_devices = whole("devices")? as u32,
        SweepParam::Payload => f.phy.payload_bytes = whole("payload")? as usize,
    }
    f.validate().map_err(CliError::config)?;
    Ok(f)
}

fn param_name(param: SweepParam) -> &'static str {
    match param {
        SweepParam::Lambda => "lambda_per_h",
        SweepParam::Devices => "n_devices",
        SweepParam::AckFraction => "ack_fraction",
        SweepParam::Payload => "payload_bytes",
    }
}

pub(crate) fn sweep(common: &Common, args: &SweepArgs) -> CliResult<String> {
    let file = required_scenario(common, None)?;
    let seeds = seed_list(common, Some(&file))?;
    let files = args.values.iter().map(|&v| apply(&file, args.param, v)).collect::<CliResult<Vec<_>>>()?;
    let jobs: Vec<(usize, u64)> = (0..files.len()).flat_map(|i| seeds.iter().map(move |&s| (i, s))).collect();
    let results: Vec<CliResult<SimMetrics>> =
        jobs.par_iter().map(|&(i, s)| run_one(&files[i], s, false).map(|o| o.metrics)).collect();
    let results = results.into_iter().collect::<CliResult<Vec<_>>>()?;
    let prefix = format!("{},", param_name(args.param));
    Ok(metrics_csv(&prefix, jobs.iter().zip(&results).map(|(&(i, _), m)| (format!("{},", args.values[i]), m))))
}
