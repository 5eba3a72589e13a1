//! Command-line front end for the placecharge library.
//!
//! Every run is deterministic given its files and flags. Output goes to
//! stdout, one line per result; `--format records` switches to `key=value`
//! lines for scripting. Errors print to stderr as `error[Code]: message`
//! and exit with code 1 when a module rejected a well-formed object and
//! code 2 when the input text or file could not be read at all.

use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use placecharge::global::{
    algebra_measure, classify_series, finitely_additive_extension, index, is_countably_additive,
    is_globally_consistent, refine_prefix_check, refinement, Partition,
};
use placecharge::integrate::{integrate_element, PRODUCT_FORMULA_TOL};
use placecharge::maps::ConsistentMap;
use placecharge::textio::{
    load_map, load_partition, parse_element, parse_extended_value, parse_rational_place,
    parse_ring_set, parse_set, ParseError,
};
use placecharge::tower::{places_above, Level};

#[derive(Parser)]
#[command(name = "placecharge", version, about = "Places, charges, and measures on the cyclotomic tower", max_term_width = 100)]
struct Cli {
    /// Output style: human-oriented lines or key=value records
    #[arg(long, global = true, value_enum, default_value_t = Format::Plain)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Plain,
    Records,
}

#[derive(Subcommand)]
enum Command {
    /// List the places at a level over a rational base place
    Places {
        /// Conductor of the field (normalized to its canonical form)
        level: u64,
        /// Rational base place: a prime or `inf`
        base: String,
    },
    /// Measure of a compact set of places under a map
    Measure {
        /// Builtin map name (lambda, omega, alternating) or map file path
        map: String,
        /// Set literal such as `[7:2:1,1:3:0]`
        set: String,
    },
    /// Pair a map with an algebraic element
    Integrate {
        /// Builtin map name or map file path
        map: String,
        /// Element literal: `rat:q`, `cycunit:p`, or `file:path`
        element: String,
    },
    /// Global consistency, series classification, and index of a map
    Global {
        /// Builtin map name or map file path
        map: String,
        /// Also classify the series over this partition file
        #[arg(long)]
        partition: Option<String>,
    },
    /// Extended measure of an algebra set, canonically or at a chosen total
    Extend {
        /// Builtin map name or map file path
        map: String,
        /// Algebra set literal: `Y`, `[..]`, or `~[..]`
        set: String,
        /// Total mass to assign to the whole space instead of the index
        #[arg(long, allow_hyphen_values = true)]
        r: Option<String>,
    },
    /// Partition file utilities
    Partition {
        #[command(subcommand)]
        command: PartitionCommand,
    },
    /// Map file utilities
    Map {
        #[command(subcommand)]
        command: MapCommand,
    },
}

#[derive(Subcommand)]
enum PartitionCommand {
    /// Check that a partition file describes a genuine partition
    Validate { file: String },
    /// Decide whether the first partition refines the second
    Refine { fine: String, coarse: String },
    /// Compare prefix sums of a map across a refinement
    PrefixCheck {
        /// Builtin map name or map file path
        map: String,
        fine: String,
        coarse: String,
        /// Number of leading coarse parts to compare
        #[arg(long, default_value_t = 50)]
        n: usize,
    },
}

#[derive(Subcommand)]
enum MapCommand {
    /// Check that a map file describes a consistent map
    Validate { file: String },
}

fn resolve_map(arg: &str) -> Result<ConsistentMap, ParseError> {
    match arg {
        "lambda" => Ok(ConsistentMap::lambda()),
        "omega" => Ok(ConsistentMap::omega()),
        "alternating" => Ok(ConsistentMap::alternating()),
        path => load_map(path),
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn run(command: &Command, format: Format) -> Result<Vec<String>, ParseError> {
    let records = format == Format::Records;
    let mut out = Vec::new();
    match command {
        Command::Places { level, base } => {
            let base = parse_rational_place(base)?;
            for w in places_above(Level::new(*level), base) {
                let body = format!(
                    "{w} deg={} lambda={}",
                    w.local_degree(),
                    w.normalized_degree()
                );
                out.push(if records {
                    format!("place={body}")
                } else {
                    body
                });
            }
        }
        Command::Measure { map, set } => {
            let c = resolve_map(map)?;
            let v = c.charge(&parse_ring_set(set)?);
            out.push(if records {
                format!("value={v}")
            } else {
                v.to_string()
            });
        }
        Command::Integrate { map, element } => {
            let c = resolve_map(map)?;
            let alpha = parse_element(element)?;
            let v = integrate_element(&c, &alpha);
            let text = if v.is_float() && v.to_f64().abs() < PRODUCT_FORMULA_TOL {
                format!("\u{2248} 0 (|\u{b7}| < {PRODUCT_FORMULA_TOL:e})")
            } else {
                v.to_string()
            };
            out.push(if records {
                format!("value={text}")
            } else {
                text
            });
        }
        Command::Global { map, partition } => {
            let c = resolve_map(map)?;
            if is_globally_consistent(&c) {
                let idx = index(&c)?;
                if records {
                    out.push("globally_consistent=yes".into());
                    out.push(format!("index={idx}"));
                } else {
                    out.push(format!("globally-consistent: yes; index: {idx}"));
                }
            } else {
                let cls = classify_series(&c, &Partition::canonical());
                if records {
                    out.push("globally_consistent=no".into());
                    out.push(format!("canonical={cls}"));
                } else {
                    out.push(format!("globally-consistent: no; canonical: {cls}"));
                }
            }
            if let Some(path) = partition {
                let p = load_partition(path)?;
                let cls = classify_series(&c, &p);
                out.push(if records {
                    format!("partition={cls}")
                } else {
                    format!("partition: {cls}")
                });
            }
        }
        Command::Extend { map, set, r } => {
            let c = resolve_map(map)?;
            let a = parse_set(set)?;
            match r {
                None => {
                    let v = algebra_measure(&c, &a)?;
                    out.push(if records {
                        format!("value={v}")
                    } else {
                        v.to_string()
                    });
                }
                Some(total) => {
                    let r = parse_extended_value(total)?;
                    let v = finitely_additive_extension(&c, &r, &a);
                    let ca = is_countably_additive(&c, &r);
                    if records {
                        out.push(format!("value={v}"));
                        out.push(format!("countably_additive={}", yes_no(ca)));
                    } else if ca {
                        out.push(format!("{v} (countably-additive: yes)"));
                    } else {
                        out.push(format!(
                            "{v} (finitely additive only; countably-additive: no)"
                        ));
                    }
                }
            }
        }
        Command::Partition { command } => match command {
            PartitionCommand::Validate { file } => {
                let p = load_partition(file)?;
                if records {
                    out.push("valid=yes".into());
                    out.push(format!("basis={}", yes_no(p.is_basis())));
                } else {
                    out.push(format!("valid: yes; basis: {}", yes_no(p.is_basis())));
                }
            }
            PartitionCommand::Refine { fine, coarse } => {
                let fine = load_partition(fine)?;
                let coarse = load_partition(coarse)?;
                let refines = refinement(&fine, &coarse)?.is_some();
                out.push(if records {
                    format!("refinement={}", yes_no(refines))
                } else {
                    format!("refinement: {}", yes_no(refines))
                });
            }
            PartitionCommand::PrefixCheck {
                map,
                fine,
                coarse,
                n,
            } => {
                let c = resolve_map(map)?;
                let fine = load_partition(fine)?;
                let coarse = load_partition(coarse)?;
                let pass = refine_prefix_check(&c, &fine, &coarse, *n)?;
                let word = if pass { "pass" } else { "fail" };
                out.push(if records {
                    format!("prefix_check={word}")
                } else {
                    format!("prefix-check: {word}")
                });
            }
        },
        Command::Map { command } => match command {
            MapCommand::Validate { file } => {
                load_map(file)?;
                out.push(if records {
                    "valid=yes".into()
                } else {
                    "valid: yes".into()
                });
            }
        },
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command, cli.format) {
        Ok(lines) => {
            for line in lines {
                println!("{line}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(if e.is_syntax() { 2 } else { 1 })
        }
    }
}
