//! Command dispatch.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use chaincore::allocation::all_axioms;
use chaincore::io::{number, parse_number};
use chaincore::{
    altruistic, core_check, core_supplier_max, optimal_suppliers, read_situation, sc_allocation, sc_star_allocation,
    Allocation, CharacteristicFunction, Coalition, CoalitionPair, Situation, SolverConfig,
};

use crate::cache::{obtain, Cache};
use crate::report::{num, Names, ReportDocument, SupplierMax, ValueRow};
use crate::{Cli, Command, Failure, RuleArg, EXIT_INPUT, EXIT_NOT_IN_CORE, EXIT_OK};

type Outcome = Result<u8, Failure>;

fn input_error(e: anyhow::Error) -> Failure {
    Failure::new(EXIT_INPUT, e)
}

pub fn execute(cli: &Cli) -> Outcome {
    let started = Instant::now();
    let path = match &cli.command {
        Command::Value { situation, .. }
        | Command::Allocate { situation, .. }
        | Command::CoreCheck { situation, .. }
        | Command::Report { situation } => situation,
    };
    let file = read_situation(path)?;
    for w in &file.warnings {
        eprintln!("{w}");
    }
    let config = solver_config(cli, file.solver)?;
    let situation = file.situation;
    let names = Names::new(&situation);

    if let Command::Allocate { rule: RuleArg::ScStar, .. } = &cli.command {
        if !situation.is_unbounded() {
            return Err(chaincore::Error::RequiresUnbounded("the modified SC-allocation").into());
        }
    }
    // validate cheap arguments before the expensive build
    let coalition = match &cli.command {
        Command::Value {
            coalition: Some(spec), ..
        } => Some(parse_coalition(spec, &situation).map_err(input_error)?),
        _ => None,
    };
    let external = match &cli.command {
        Command::CoreCheck { source, .. } if rule_name(source).is_none() => {
            Some(read_payoffs(Path::new(source), &situation).map_err(input_error)?)
        }
        _ => None,
    };
    let supplier_max_target = match &cli.command {
        Command::CoreCheck {
            supplier_max: Some(id), ..
        } => Some(supplier_index(id, &situation).map_err(input_error)?),
        _ => None,
    };

    let cache = (!cli.no_cache).then(|| Cache::new(&cli.cache_dir));
    let build_started = Instant::now();
    let (cf, _) = obtain(&situation, &config, cache.as_ref())?;
    let build_seconds = build_started.elapsed().as_secs_f64();

    let mut doc = ReportDocument {
        command: String::new(),
        fingerprint: cf.fingerprint().to_string(),
        solver: config.clone(),
        retailers: (0..situation.n()).map(|i| names.retailer(i)).collect(),
        suppliers: (0..situation.m()).map(|j| names.supplier(j)).collect(),
        unbounded: situation.is_unbounded(),
        warnings: file.warnings.clone(),
        values: None,
        structure: None,
        optimal_suppliers: None,
        allocations: Vec::new(),
        supplier_max: Vec::new(),
        timings: None,
    };
    let mut code = EXIT_OK;

    match &cli.command {
        Command::Value { .. } => {
            doc.command = "value".into();
            let rows = match coalition {
                Some(pair) => vec![value_row(&cf, &names, pair)?],
                None => cf.pairs().map(|(p, _)| value_row(&cf, &names, p)).collect::<Result<_, _>>()?,
            };
            doc.values = Some(rows);
        }
        Command::Allocate { rule, axioms, .. } => {
            doc.command = "allocate".into();
            let x = allocate(&cf, *rule)?;
            if *rule == RuleArg::ScStar {
                doc.optimal_suppliers = Some(names.suppliers(optimal_suppliers(&cf)?));
            }
            let core = core_check(&cf, &x)?;
            let checks = if *axioms { Some(all_axioms(&cf, &x)?) } else { None };
            doc.allocations.push(names.allocation(&x, &core, checks.as_deref()));
        }
        Command::CoreCheck { source, .. } => {
            doc.command = "core-check".into();
            let x = match (rule_name(source), external) {
                (Some(rule), _) => {
                    if rule == RuleArg::ScStar && !situation.is_unbounded() {
                        return Err(chaincore::Error::RequiresUnbounded("the modified SC-allocation").into());
                    }
                    allocate(&cf, rule)?
                }
                (None, Some(payoffs)) => Allocation::external(payoffs),
                (None, None) => unreachable!("payoffs are read before the build"),
            };
            let core = core_check(&cf, &x)?;
            if let Some(w) = &core.worst_violation {
                eprintln!(
                    "not in the core: coalition {} is short by {}",
                    names.pair(w.pair),
                    num(w.deficit)
                );
                code = EXIT_NOT_IN_CORE;
            } else if !core.member {
                eprintln!(
                    "not in the core: payoffs sum to {} instead of v(N, M) = {}",
                    num(x.total()),
                    num(cf.grand_value())
                );
                code = EXIT_NOT_IN_CORE;
            }
            doc.allocations.push(names.allocation(&x, &core, None));
            if let Some(j) = supplier_max_target {
                doc.supplier_max.push(SupplierMax {
                    supplier: names.supplier(j),
                    value: core_supplier_max(&cf, j)?,
                });
            }
        }
        Command::Report { .. } => {
            doc.command = "report".into();
            doc.values = Some(cf.pairs().map(|(p, _)| value_row(&cf, &names, p)).collect::<Result<_, _>>()?);
            doc.structure = Some(
                [
                    cf.check_positivity(),
                    cf.check_superadditivity(),
                    cf.check_monotonicity(),
                ]
                .iter()
                .map(|r| names.structure(r))
                .collect(),
            );
            let mut rules = vec![RuleArg::Altruistic, RuleArg::Sc];
            if situation.is_unbounded() {
                doc.optimal_suppliers = Some(names.suppliers(optimal_suppliers(&cf)?));
                rules.push(RuleArg::ScStar);
            }
            for rule in rules {
                let x = allocate(&cf, rule)?;
                let core = core_check(&cf, &x)?;
                let checks = all_axioms(&cf, &x)?;
                doc.allocations.push(names.allocation(&x, &core, Some(&checks)));
            }
            for j in 0..situation.m() {
                doc.supplier_max.push(SupplierMax {
                    supplier: names.supplier(j),
                    value: core_supplier_max(&cf, j)?,
                });
            }
        }
    }

    if cli.timings {
        doc.timings = Some(BTreeMap::from([
            ("build_seconds".to_string(), build_seconds),
            ("total_seconds".to_string(), started.elapsed().as_secs_f64()),
        ]));
    }
    let text = doc.render(cli.format).map_err(input_error)?;
    emit(&text, cli.out.as_deref()).map_err(input_error)?;
    Ok(code)
}

fn solver_config(cli: &Cli, mut config: SolverConfig) -> Result<SolverConfig, Failure> {
    if let Some(r) = cli.resolution {
        config.initial_resolution = r;
    }
    if let Some(r) = cli.rounds {
        config.rounds = r;
    }
    if let Some(d) = cli.max_dims {
        config.max_dims = d;
    }
    config.check().map_err(|e| input_error(anyhow!(e)))?;
    Ok(config)
}

fn allocate(cf: &CharacteristicFunction, rule: RuleArg) -> chaincore::Result<Allocation> {
    match rule {
        RuleArg::Altruistic => altruistic(cf),
        RuleArg::Sc => sc_allocation(cf),
        RuleArg::ScStar => sc_star_allocation(cf),
    }
}

fn rule_name(s: &str) -> Option<RuleArg> {
    match s {
        "altruistic" => Some(RuleArg::Altruistic),
        "sc" => Some(RuleArg::Sc),
        "sc-star" => Some(RuleArg::ScStar),
        _ => None,
    }
}

fn value_row(cf: &CharacteristicFunction, names: &Names<'_>, pair: CoalitionPair) -> chaincore::Result<ValueRow> {
    Ok(ValueRow {
        retailers: names.retailers(pair.retailers),
        suppliers: names.suppliers(pair.suppliers),
        value: cf.value(pair)?,
        orders: cf.orders(pair)?.map(|q| q.rows().map(|(_, row)| row.to_vec()).collect()),
    })
}

fn supplier_index(id: &str, situation: &Situation) -> anyhow::Result<usize> {
    situation
        .suppliers()
        .iter()
        .position(|s| s.id == id.trim())
        .ok_or_else(|| anyhow!("no supplier with id \"{id}\""))
}

/// Parses `R=1,2;S=1` (player ids; either part may be empty or omitted).
pub fn parse_coalition(spec: &str, situation: &Situation) -> anyhow::Result<CoalitionPair> {
    let mut retailers = Coalition::EMPTY;
    let mut suppliers = Coalition::EMPTY;
    for part in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, ids) = part
            .split_once('=')
            .ok_or_else(|| anyhow!("expected R=ids or S=ids, found \"{part}\""))?;
        let ids = ids.split(',').map(str::trim).filter(|s| !s.is_empty());
        match key.trim() {
            "R" | "r" => {
                for id in ids {
                    let i = situation
                        .retailers()
                        .iter()
                        .position(|r| r.id == id)
                        .ok_or_else(|| anyhow!("no retailer with id \"{id}\""))?;
                    retailers = retailers.union(Coalition::singleton(i));
                }
            }
            "S" | "s" => {
                for id in ids {
                    suppliers = suppliers.union(Coalition::singleton(supplier_index(id, situation)?));
                }
            }
            other => bail!("unknown coalition part \"{other}\"; use R= and S="),
        }
    }
    Ok(CoalitionPair::new(retailers, suppliers))
}

/// Reads `n + m` payoffs, as a JSON array or as whitespace/comma separated
/// numbers (fractions such as `113/3` allowed).
pub fn read_payoffs(path: &Path, situation: &Situation) -> anyhow::Result<Vec<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading payoffs from {}", path.display()))?;
    let payoffs: Vec<f64> = match serde_json::from_str::<serde_json::Value>(&text) {
        Ok(serde_json::Value::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(k, v)| number(v, &format!("$[{k}]")))
            .collect::<Result<_, _>>()?,
        _ => text
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(|s| parse_number(s).ok_or_else(|| anyhow!("\"{s}\" is not a number")))
            .collect::<anyhow::Result<_>>()?,
    };
    let expected = situation.n() + situation.m();
    if payoffs.len() != expected {
        bail!(
            "{} lists {} payoffs but the situation has {expected} players",
            path.display(),
            payoffs.len()
        );
    }
    Ok(payoffs)
}

fn emit(text: &str, out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}
