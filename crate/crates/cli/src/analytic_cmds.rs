use std::fmt::Write as _;

use lora_capacity::analytic::{network_received_at_max_rate, per_node_throughput, table1_for};
use lora_capacity::geometry::sample_deployment;
use lora_capacity::netsim::{run_seeds, SimConfig};
use lora_capacity::phy::{airtime_us, max_payload, MICROS_PER_SEC};
use lora_capacity::{CellModel, ScenarioSpec, SpreadingFactor, Table1Row, TransmissionProfile};
use rayon::prelude::*;

use crate::output::{base_spec, load_scenario, mean_half_width, preset};
use crate::{
    CliError, CliResult, Common, Fig2Args, Fig3Args, Format, SfDistArgs, SimColumns, Table1Args, ToaArgs, SCHEMA_LINE,
};

pub(crate) fn toa(args: &ToaArgs) -> CliResult<String> {
    let mut out = format!("{SCHEMA_LINE}\nsf,payload_bytes,toa_ms\n");
    for sf in SpreadingFactor::ALL {
        for payload in 1..=max_payload(sf) {
            let profile = TransmissionProfile::new(sf, payload)
                .with_bandwidth(args.bandwidth_hz)
                .with_coding_rate(args.coding_rate)
                .with_preamble(args.preamble);
            let us = airtime_us(&profile).map_err(CliError::config)?;
            let _ = writeln!(out, "{},{payload},{}.{:03}", sf.value(), us / 1000, us % 1000);
        }
    }
    Ok(out)
}

pub(crate) fn sf_dist(common: &Common, args: &SfDistArgs) -> CliResult<String> {
    let (cell, probabilities): (Option<CellModel>, [f64; 6]) = match &common.config {
        Some(path) => {
            if common.preset.is_some() {
                return Err(CliError::Config("--preset and --config are exclusive".into()));
            }
            let file = load_scenario(path)?;
            let cell = file.cell().map_err(CliError::config)?;
            (cell, file.sf_probabilities().map_err(CliError::config)?)
        }
        None => {
            let cell = preset(common)?.cell();
            let p = cell.probabilities;
            (Some(cell), p)
        }
    };
    let empirical = match (args.empirical, &cell) {
        (Some(0), _) => return Err(CliError::Config("--empirical needs at least one device".into())),
        (Some(n), Some(cell)) => {
            let mut counts = [0usize; 6];
            for placement in sample_deployment(cell, n, args.seed) {
                counts[placement.sf.index()] += 1;
            }
            Some(counts.map(|c| c as f64 / n as f64))
        }
        (Some(_), None) => {
            return Err(CliError::Config("--empirical needs a radio model, not fixed probabilities".into()))
        }
        (None, _) => None,
    };

    let mut out = String::new();
    match args.format {
        Format::Csv => {
            out.push_str(SCHEMA_LINE);
            out.push_str("\nsf,probability,ring_radius_km");
            if empirical.is_some() {
                out.push_str(",empirical");
            }
            out.push('\n');
            for sf in SpreadingFactor::ALL {
                let i = sf.index();
                let radius = cell.as_ref().map_or(String::new(), |c| format!("{:.6}", c.ring_radii_km[i]));
                let _ = write!(out, "{},{:.6},{radius}", sf.value(), probabilities[i]);
                if let Some(e) = &empirical {
                    let _ = write!(out, ",{:.6}", e[i]);
                }
                out.push('\n');
            }
        }
        Format::Table => {
            let _ = writeln!(
                out,
                "{:<5} {:>11} {:>10}{}",
                "SF",
                "probability",
                "ring (km)",
                if empirical.is_some() { "  empirical" } else { "" }
            );
            for sf in SpreadingFactor::ALL {
                let i = sf.index();
                let radius = cell.as_ref().map_or("-".to_string(), |c| format!("{:.3}", c.ring_radii_km[i]));
                let _ = write!(out, "{:<5} {:>11.4} {radius:>10}", sf.to_string(), probabilities[i]);
                if let Some(e) = &empirical {
                    let _ = write!(out, " {:>10.4}", e[i]);
                }
                out.push('\n');
            }
        }
    }
    Ok(out)
}

/// Distinct integers on a logarithmic grid from `lo` to `hi`, both included.
fn log_grid_u32(lo: u32, hi: u32, per_decade: u32) -> Vec<u32> {
    let decades = (f64::from(hi) / f64::from(lo)).log10();
    let steps = (decades * f64::from(per_decade)).ceil() as u32;
    let mut v: Vec<u32> = (0..=steps)
        .map(|k| (f64::from(lo) * 10f64.powf(decades * f64::from(k) / f64::from(steps.max(1)))).round() as u32)
        .collect();
    v.dedup();
    v
}

fn log_grid(lo: f64, hi: f64, per_decade: u32) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let steps = (decades * f64::from(per_decade)).ceil().max(1.0) as u32;
    (0..=steps).map(|k| lo * 10f64.powf(decades * f64::from(k) / f64::from(steps))).collect()
}

fn with_payload(template: &ScenarioSpec, payload: usize) -> ScenarioSpec {
    ScenarioSpec { payload_bytes: payload, ..template.clone() }
}

pub(crate) fn fig2(common: &Common, args: &Fig2Args) -> CliResult<String> {
    if args.max_devices == 0 || args.points_per_decade == 0 {
        return Err(CliError::Config("--max-devices and --points-per-decade must be positive".into()));
    }
    let template = with_payload(&base_spec(common)?, args.payload);
    template.validate().map_err(CliError::config)?;
    let ns = log_grid_u32(1, args.max_devices, args.points_per_decade);
    let points = network_received_at_max_rate(&template, &ns).map_err(CliError::config)?;
    let mut out = format!("{SCHEMA_LINE}\nn_devices,network_pkt_per_h,per_node_pkt_per_h\n");
    for p in points {
        let _ = writeln!(out, "{},{:.6},{:.6}", p.n_devices, p.network_packets_per_hour, p.per_node_packets_per_hour);
    }
    Ok(out)
}

/// Per-node delivered packets per hour over the seeds: mean and half-width.
fn simulated_throughput(sim: &SimColumns, spec: &ScenarioSpec, seeds: &[u64]) -> CliResult<(f64, f64)> {
    if !(sim.sim_duration_s.is_finite() && sim.sim_duration_s > 0.0) {
        return Err(CliError::Config("--sim-duration-s must be positive".into()));
    }
    let duration = (sim.sim_duration_s * MICROS_PER_SEC as f64).round() as u64;
    let config = SimConfig::new(spec.clone(), duration, 0);
    config.validate().map_err(CliError::config)?;
    let runs = run_seeds(&config, seeds).map_err(CliError::runtime)?;
    let xs: Vec<f64> = runs.iter().map(|m| m.per_node_packets_per_hour()).collect();
    Ok(mean_half_width(&xs))
}

fn sim_seeds(sim: &SimColumns) -> CliResult<Option<Vec<u64>>> {
    match sim.simulate {
        None => Ok(None),
        Some(0) => Err(CliError::Config("--simulate needs at least one seed".into())),
        Some(k) => Ok(Some((1..=k).collect())),
    }
}

pub(crate) fn fig3(common: &Common, args: &Fig3Args) -> CliResult<String> {
    if !(args.lambda_min > 0.0 && args.lambda_max >= args.lambda_min && args.lambda_max.is_finite()) {
        return Err(CliError::Config("need 0 < --lambda-min <= --lambda-max".into()));
    }
    if args.points_per_decade == 0 || args.devices.is_empty() {
        return Err(CliError::Config("need devices and a positive grid density".into()));
    }
    let template = with_payload(&base_spec(common)?, args.payload);
    let seeds = sim_seeds(&args.sim)?;
    let lambdas = log_grid(args.lambda_min, args.lambda_max, args.points_per_decade);
    let points: Vec<(u32, f64)> = args.devices.iter().flat_map(|&n| lambdas.iter().map(move |&l| (n, l))).collect();

    let rows: Vec<CliResult<String>> = points
        .par_iter()
        .map(|&(n, lambda)| {
            let spec = template.with_devices(n).with_lambda(lambda);
            let r = per_node_throughput(&spec).map_err(CliError::config)?;
            let mut row = format!(
                "{n},{lambda:.6},{:.6},{:.6},{:.6},{:.6}",
                r.per_node_packets_per_hour, r.per_node_bytes_per_hour, r.network_packets_per_hour, r.delivery_ratio
            );
            if let Some(seeds) = &seeds {
                let (mean, half) = simulated_throughput(&args.sim, &spec, seeds)?;
                let _ = write!(row, ",{mean:.6},{half:.6}");
            }
            row.push('\n');
            Ok(row)
        })
        .collect();

    let mut out = format!(
        "{SCHEMA_LINE}\nn_devices,lambda_per_h,per_node_pkt_per_h,per_node_bytes_per_h,network_pkt_per_h,delivery_ratio{}\n",
        if seeds.is_some() { ",sim_per_node_pkt_per_h,sim_half_width" } else { "" }
    );
    for row in rows {
        out.push_str(&row?);
    }
    Ok(out)
}

struct Table1Line {
    row: Table1Row,
    sim: Option<(f64, f64)>,
}

pub(crate) fn table1(common: &Common, args: &Table1Args) -> CliResult<String> {
    if args.devices.is_empty() || args.payloads.is_empty() {
        return Err(CliError::Config("need at least one device count and payload".into()));
    }
    let template = base_spec(common)?;
    let seeds = sim_seeds(&args.sim)?;
    let cases: Vec<(usize, u32)> =
        args.payloads.iter().flat_map(|&p| args.devices.iter().map(move |&n| (p, n))).collect();

    let lines: Vec<CliResult<Table1Line>> = cases
        .par_iter()
        .map(|&(payload, n)| {
            let spec = with_payload(&template, payload).with_devices(n);
            let row = table1_for(&spec).map_err(CliError::config)?;
            let sim = match &seeds {
                Some(seeds) => {
                    Some(simulated_throughput(&args.sim, &spec.with_lambda(row.lambda_star_per_hour), seeds)?)
                }
                None => None,
            };
            Ok(Table1Line { row, sim })
        })
        .collect();
    let lines = lines.into_iter().collect::<CliResult<Vec<_>>>()?;

    let mut out = String::new();
    match args.format {
        Format::Csv => {
            out.push_str(SCHEMA_LINE);
            out.push_str("\nn_devices,payload_bytes,max_pkt_per_h,max_bytes_per_h,lambda_star_per_h,success_pct,attempt_success_pct");
            if seeds.is_some() {
                out.push_str(",sim_per_node_pkt_per_h,sim_half_width");
            }
            out.push('\n');
            for Table1Line { row: r, sim } in &lines {
                let _ = write!(
                    out,
                    "{},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
                    r.n_devices,
                    r.payload_bytes,
                    r.max_packets_per_hour,
                    r.max_bytes_per_hour,
                    r.lambda_star_per_hour,
                    100.0 * r.success_probability,
                    100.0 * r.attempt_success
                );
                if let Some((mean, half)) = sim {
                    let _ = write!(out, ",{mean:.6},{half:.6}");
                }
                out.push('\n');
            }
        }
        Format::Table => {
            let _ = write!(
                out,
                "{:>7} {:>7} {:>12} {:>12} {:>10} {:>9}",
                "devices", "payload", "pkt/h/node", "bytes/h/node", "lambda*", "success%"
            );
            if seeds.is_some() {
                let _ = write!(out, " {:>20}", "simulated pkt/h");
            }
            out.push('\n');
            for Table1Line { row: r, sim } in &lines {
                let _ = write!(
                    out,
                    "{:>7} {:>7} {:>12.1} {:>12.1} {:>10.0} {:>9.2}",
                    r.n_devices,
                    r.payload_bytes,
                    r.max_packets_per_hour,
                    r.max_bytes_per_hour,
                    r.lambda_star_per_hour,
                    100.0 * r.success_probability
                );
                if let Some((mean, half)) = sim {
                    let _ = write!(out, " {:>20}", format!("{mean:.1} ± {half:.1}"));
                }
                out.push('\n');
            }
        }
    }
    Ok(out)
}
