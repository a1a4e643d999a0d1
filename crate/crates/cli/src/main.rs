mod args;

use std::io::Write;
use std::process::ExitCode;

use alc_core::analysis::{self, DepthVariant, ModelParams, Size};
use alc_core::lctrie;
use alc_core::montecarlo::{self, ExperimentConfig};
use alc_core::report::{Cell, Table};
use alc_core::source::{load_keys, load_queries};
use clap::error::ErrorKind;
use clap::{CommandFactory, Parser};
use serde_json::{json, Value};

use args::{
    BuildArgs, Cli, Command, ExpectArgs, Format, ModelArgs, PredictArgs, QueryArgs, RunArgs,
    SimDepthArgs, SimFillupArgs, SizeArgs,
};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Predict(a) => predict(a),
        Command::Expect(a) => expect(a),
        Command::SimFillup(a) => sim_fillup(a),
        Command::SimDepth(a) => sim_depth(a),
        Command::Build(a) => build(a),
        Command::Query(a) => query(a),
    };
    match result.and_then(|out| emit(&out)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

type Run = Result<String, Box<dyn std::error::Error>>;

fn emit(out: &str) -> Result<(), Box<dyn std::error::Error>> {
    let mut stdout = std::io::stdout().lock();
    match stdout.write_all(out.as_bytes()).and_then(|_| stdout.flush()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn usage_error(kind: ErrorKind, msg: impl std::fmt::Display) -> ! {
    Cli::command().error(kind, msg).exit()
}

fn size_of(size: &SizeArgs) -> Size {
    match (size.n, size.lambda) {
        (Some(n), _) => Size::Fixed { n },
        (_, Some(lambda)) => Size::Poisson { lambda },
        _ => unreachable!("clap requires one of --n/--lambda"),
    }
}

fn params(model: &ModelArgs, alpha: f64) -> Result<ModelParams, alc_core::Error> {
    ModelParams::new(model.p, alpha, size_of(&model.size))
}

fn experiment(params: ModelParams, run: &RunArgs) -> ExperimentConfig {
    ExperimentConfig::new(params, run.trials as usize, run.seed).with_jobs(run.jobs.map(|j| j as usize))
}

fn render(table: &Table, format: Format, config: Value, extra: Option<(&str, Value)>) -> String {
    match format {
        Format::Csv => table.to_csv(),
        Format::Json => {
            let mut doc = table.to_json(&config);
            if let Some((key, value)) = extra {
                doc[key] = value;
            }
            format!("{doc:#}\n")
        }
    }
}

const MODEL_COLUMNS: [&str; 6] = ["model", "n_or_lambda", "p", "alpha", "k", "value"];

fn predict(a: PredictArgs) -> Run {
    let params = params(&a.model, a.alpha)?;
    let size = params.size.value();
    let p = params.p;
    let mut table = Table::new(MODEL_COLUMNS);
    let mut row = |label: &str, k: Cell, value: Cell| {
        table.push(vec![
            Cell::from(label),
            Cell::from(size),
            Cell::from(p),
            Cell::from(params.alpha),
            k,
            value,
        ]);
    };
    let real = |r: alc_core::Result<f64>| r.map_or(Cell::Empty, Cell::from);

    row("closed_form", Cell::Empty, real(analysis::predict_level_closed_form(size, params.alpha, p)));
    match analysis::predict_level_calibrated(&params) {
        Ok(k) => row(
            "calibrated",
            Cell::from(k),
            Cell::from(analysis::expected_fill_fraction(&params, k)),
        ),
        Err(e) => {
            eprintln!("calibrated level unavailable: {e}");
            row("calibrated", Cell::Empty, Cell::Empty);
        }
    }
    row("full_fillup", Cell::Empty, real(analysis::predict_full_fillup(size, p)));
    row("depth_alpha_lc", Cell::Empty, real(analysis::depth_constant(p, DepthVariant::AlphaLc)));
    row("depth_full_lc", Cell::Empty, real(analysis::depth_constant(p, DepthVariant::FullLc)));
    Ok(render(&table, a.format, json!(params), None))
}

fn expect(a: ExpectArgs) -> Run {
    // alpha plays no part in the expectation; any valid value will do.
    let params = params(&a.model, 0.5)?;
    let ks: Vec<usize> = a.k.clone().collect();
    let mut config = json!({
        "size": params.size,
        "p": params.p,
        "k": [a.k.start(), a.k.end()],
    });
    let table = match a.trials {
        Some(trials) => {
            let run = RunArgs {
                trials,
                seed: a.seed,
                jobs: a.jobs,
            };
            config["trials"] = json!(trials);
            config["seed"] = json!(a.seed);
            montecarlo::expectation_report(&experiment(params, &run), &ks)?
        }
        None => {
            let mut table = Table::new(MODEL_COLUMNS);
            for k in ks {
                table.push(vec![
                    Cell::from(params.size.model_name()),
                    Cell::from(params.size.value()),
                    Cell::from(params.p),
                    Cell::Empty,
                    Cell::from(k),
                    Cell::from(analysis::expected_fill_fraction(&params, k)),
                ]);
            }
            table
        }
    };
    Ok(render(&table, a.format, config, None))
}

fn sim_fillup(a: SimFillupArgs) -> Run {
    let sizes: Vec<Size> = if a.n.is_empty() {
        a.lambda.iter().map(|&lambda| Size::Poisson { lambda }).collect()
    } else {
        a.n.iter().map(|&n| Size::Fixed { n }).collect()
    };
    if !a.sweep && (sizes.len() > 1 || a.alpha.len() > 1) {
        usage_error(ErrorKind::ArgumentConflict, "lists for --n/--lambda/--alpha need --sweep");
    }
    let params = ModelParams::new(a.p, a.alpha[0], sizes[0])?;
    let config = experiment(params, &a.run);

    if a.sweep {
        let values: Vec<f64> = sizes.iter().map(Size::value).collect();
        let table = montecarlo::fillup_sweep(&config, &values, &a.alpha)?;
        let echo = json!({ "config": config, "sizes": values, "alphas": a.alpha });
        return Ok(render(&table, a.format, echo, None));
    }

    let hist = montecarlo::simulate_fillup(&config)?;
    let summary = json!({
        "mode": hist.mode(),
        "mean": hist.mean(),
        "stderr": hist.stderr(),
        "undefined": hist.undefined,
        "top_two_consecutive_mass": hist.top_two_consecutive_mass(),
        "histogram": hist.counts,
    });
    if a.format == Format::Csv {
        eprintln!("summary: {summary}");
    }
    Ok(render(&hist.rows_table(), a.format, json!(config), Some(("summary", summary))))
}

fn sim_depth(a: SimDepthArgs) -> Run {
    let config = experiment(params(&a.model, a.alpha)?, &a.run);
    let summary = montecarlo::simulate_depth(&config)?;
    let stats = json!({
        "mean": summary.mean,
        "variance": summary.variance,
        "quantiles": summary.quantiles,
        "mean_over_log2_n": summary.mean_over_log2_n,
        "mean_over_loglog": summary.mean_over_loglog,
        "undefined": summary.undefined,
    });
    if a.format == Format::Csv {
        eprintln!("summary: {stats}");
    }
    Ok(render(&summary.rows_table(), a.format, json!(config), Some(("summary", stats))))
}

fn build(a: BuildArgs) -> Run {
    let keys = load_keys(&a.keys)?;
    let stats = lctrie::compress(&keys, a.alpha)?.stats();
    Ok(match a.format {
        Format::Json => {
            let doc = json!({
                "config": { "keys": a.keys, "alpha": a.alpha },
                "stats": stats,
            });
            format!("{doc:#}\n")
        }
        Format::Csv => {
            let mut table = Table::new(["stat", "value"]);
            let Value::Object(fields) = json!(stats) else {
                unreachable!("stats serialize to an object")
            };
            for (name, value) in fields {
                match value {
                    Value::Object(hist) => {
                        for (consumed, count) in hist {
                            table.push(vec![
                                Cell::from(format!("{name}[{consumed}]")),
                                Cell::from(count.to_string()),
                            ]);
                        }
                    }
                    v => table.push(vec![Cell::from(name), Cell::from(v.to_string())]),
                }
            }
            table.to_csv()
        }
    })
}

fn query(a: QueryArgs) -> Run {
    let keys = load_keys(&a.keys)?;
    let queries = load_queries(&a.queries)?;
    let alc = lctrie::compress(&keys, a.alpha)?;
    let matches: Vec<_> = queries.iter().map(|q| alc.longest_prefix_match(q)).collect();
    Ok(match a.format {
        Format::Csv => matches
            .iter()
            .map(|m| match m {
                Some(m) => format!("{} {}\n", m.key, m.prefix_len),
                None => "none\n".to_string(),
            })
            .collect(),
        Format::Json => {
            let rows: Vec<Value> = queries
                .iter()
                .zip(&matches)
                .map(|(q, m)| json!({ "query": q.to_string(), "match": m }))
                .collect();
            format!("{:#}\n", json!({ "config": { "alpha": a.alpha }, "rows": rows }))
        }
    })
}
