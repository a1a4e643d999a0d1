use std::ops::RangeInclusive;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "alctrie", version, about = "Partial-fillup level-compressed tries")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Predicted alpha-fillup level and depth constants.
    Predict(PredictArgs),
    /// Expected fill fraction E[X_k / 2^k] over a range of levels.
    Expect(ExpectArgs),
    /// Histogram of the alpha-fillup level over random tries.
    SimFillup(SimFillupArgs),
    /// Depth of key 0 in random alpha-LC tries.
    SimDepth(SimDepthArgs),
    /// Compress a key file and report structure statistics.
    Build(BuildArgs),
    /// Longest-prefix match of each query against a key file.
    Query(QueryArgs),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Args)]
#[group(id = "size", required = true, multiple = false)]
pub struct SizeArgs {
    /// Fixed number of keys.
    #[arg(long, value_parser = parse_count)]
    pub n: Option<u64>,
    /// Poisson mean number of keys.
    #[arg(long, value_parser = parse_positive)]
    pub lambda: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[command(flatten)]
    pub size: SizeArgs,
    /// Probability of a 1 bit, as a decimal in (0, 1).
    #[arg(long, default_value = "0.7", value_parser = parse_p)]
    pub p: f64,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Number of independent trials.
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: u64,
    /// Master seed; fully determines the output.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads (default: all cores). Does not change the output.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub jobs: Option<u64>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Fill threshold, as a decimal in (0, 1).
    #[arg(long, default_value = "0.5", value_parser = parse_alpha)]
    pub alpha: f64,
    /// Output encoding.
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ExpectArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Inclusive level range `a..b`, or a single level.
    #[arg(long, default_value = "0..20", value_parser = parse_range)]
    pub k: RangeInclusive<usize>,
    /// Add a Monte Carlo column from this many trials.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: Option<u64>,
    /// Master seed for the Monte Carlo column.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads for the Monte Carlo column.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub jobs: Option<u64>,
    /// Output encoding.
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SimFillupArgs {
    /// Fixed number of keys; a comma list with --sweep.
    #[arg(long, value_delimiter = ',', value_parser = parse_count, required_unless_present = "lambda", conflicts_with = "lambda")]
    pub n: Vec<u64>,
    /// Poisson mean number of keys; a comma list with --sweep.
    #[arg(long, value_delimiter = ',', value_parser = parse_positive)]
    pub lambda: Vec<f64>,
    /// Probability of a 1 bit, as a decimal in (0, 1).
    #[arg(long, default_value = "0.7", value_parser = parse_p)]
    pub p: f64,
    /// Fill threshold in (0, 1]; a comma list with --sweep.
    #[arg(long, value_delimiter = ',', default_value = "0.5", value_parser = parse_alpha)]
    pub alpha: Vec<f64>,
    /// Emit one summary row per (size, alpha) instead of per-trial rows.
    #[arg(long)]
    pub sweep: bool,
    #[command(flatten)]
    pub run: RunArgs,
    /// Output encoding.
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SimDepthArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Fill threshold in (0, 1].
    #[arg(long, default_value = "0.5", value_parser = parse_alpha)]
    pub alpha: f64,
    #[command(flatten)]
    pub run: RunArgs,
    /// Output encoding.
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Key file: one 0/1 string or IPv4 prefix per line.
    #[arg(long, value_name = "FILE")]
    pub keys: PathBuf,
    /// Fill threshold in (0, 1].
    #[arg(long, default_value = "0.5", value_parser = parse_alpha)]
    pub alpha: f64,
    /// Output encoding.
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    /// Key file: one 0/1 string or IPv4 prefix per line.
    #[arg(long, value_name = "FILE")]
    pub keys: PathBuf,
    /// Query file, same format; duplicates allowed.
    #[arg(long, value_name = "FILE")]
    pub queries: PathBuf,
    /// Fill threshold in (0, 1].
    #[arg(long, default_value = "0.5", value_parser = parse_alpha)]
    pub alpha: f64,
    /// Output encoding: csv prints `key prefix_len` or `none` per line.
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

fn parse_decimal(s: &str) -> Result<f64, String> {
    let digits = s.replace('.', "");
    if s.matches('.').count() > 1 || digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(format!("`{s}` is not a decimal number"));
    }
    s.parse().map_err(|_| format!("`{s}` is not a decimal number"))
}

fn parse_p(s: &str) -> Result<f64, String> {
    let p = parse_decimal(s)?;
    if p > 0.0 && p < 1.0 {
        Ok(p)
    } else {
        Err("must lie strictly between 0 and 1".into())
    }
}

fn parse_alpha(s: &str) -> Result<f64, String> {
    let a = parse_decimal(s)?;
    if a > 0.0 && a <= 1.0 {
        Ok(a)
    } else {
        Err("must lie in (0, 1]".into())
    }
}

fn parse_count(s: &str) -> Result<u64, String> {
    s.parse().map_err(|_| format!("`{s}` is not a non-negative integer"))
}

fn parse_positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("`{s}` is not a positive number")),
    }
}

fn parse_range(s: &str) -> Result<RangeInclusive<usize>, String> {
    let bound = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("`{s}` is not a range `a..b`"));
    let range = match s.split_once("..") {
        Some((a, b)) => bound(a)?..=bound(b)?,
        None => bound(s).map(|k| k..=k)?,
    };
    if range.is_empty() {
        return Err(format!("`{s}` is an empty range"));
    }
    Ok(range)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn decimals_only() {
        assert_eq!(parse_p("0.7"), Ok(0.7));
        assert_eq!(parse_p(".25"), Ok(0.25));
        assert!(parse_p("7e-1").is_err());
        assert!(parse_p("1/2").is_err());
        assert!(parse_p("1.0").is_err());
        assert!(parse_p("0.5.1").is_err());
        assert_eq!(parse_alpha("1"), Ok(1.0));
        assert!(parse_alpha("0").is_err());
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_range("0..20"), Ok(0..=20));
        assert_eq!(parse_range("7"), Ok(7..=7));
        assert!(parse_range("5..2").is_err());
        assert!(parse_range("a..2").is_err());
    }
}
