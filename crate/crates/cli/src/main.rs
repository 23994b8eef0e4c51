use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches, Command};
use visunit::cluster::{cluster_family, ConfusionMatrix};
use visunit::corpus::write_corpus;
use visunit::hierarchy::hierarchical_train;
use visunit::hmm::HmmSet;
use visunit::lexicon::{Granularity, P2VMap};
use visunit::pipeline::{Experiment, ExperimentConfig, Training, CONFIG_KEYS};
use visunit::Error;

/// Each config key is a flag of the same name; a hyphenated spelling is
/// accepted too.
fn key_arg(key: &'static str) -> Arg {
    let arg = Arg::new(key).long(key).value_name("VALUE");
    if key.contains('_') {
        arg.alias(&*Box::leak(key.replace('_', "-").into_boxed_str()))
    } else {
        arg
    }
}

fn command() -> Command {
    let mut shared = vec![Arg::new("config").long("config").short('c').value_name("FILE").help("key = value config file")];
    for key in CONFIG_KEYS {
        shared.push(key_arg(key));
    }
    let fold = Arg::new("fold").long("fold").value_name("K").default_value("0").value_parser(clap::value_parser!(usize));
    let sub = |name: &'static str, about: &'static str| Command::new(name).about(about).args(shared.clone());
    Command::new("visunit")
        .about("Speaker-dependent visual-unit discovery for lipreading")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(Arg::new("verbose").long("verbose").short('v').action(ArgAction::Count).global(true))
        .subcommand(sub("synth", "Write a synthetic corpus, lexicon and design map"))
        .subcommand(sub("folds", "Write the cross-validation fold plan"))
        .subcommand(
            sub("train", "Train classifier models on one fold")
                .arg(fold.clone())
                .arg(Arg::new("hierarchical").long("hierarchical").action(ArgAction::SetTrue))
                .arg(Arg::new("out").long("out").value_name("FILE")),
        )
        .subcommand(
            sub("decode", "Decode one fold's test utterances")
                .arg(fold.clone())
                .arg(Arg::new("models").long("models").value_name("FILE").required(true))
                .arg(Arg::new("out").long("out").value_name("FILE")),
        )
        .subcommand(
            sub("score", "Align hypotheses against references")
                .arg(fold)
                .arg(Arg::new("hyp").long("hyp").value_name("FILE").required(true))
                .arg(Arg::new("scoring").long("scoring").value_name("UNIT")),
        )
        .subcommand(
            sub("cluster", "Build a map family from a confusion matrix")
                .arg(Arg::new("confusions").long("confusions").value_name("FILE").required(true)),
        )
        .subcommand(sub("discover", "Run the three-step discovery and the unit-size sweep"))
        .subcommand(sub("netstudy", "Score the six classifier/network pairings"))
        .subcommand(sub("hierstudy", "Compare visual-unit and hierarchically trained phoneme models"))
}

fn load_config(m: &ArgMatches) -> visunit::Result<ExperimentConfig> {
    let mut cfg = match m.get_one::<String>("config") {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    for key in CONFIG_KEYS {
        if let Some(v) = m.get_one::<String>(key) {
            cfg.set(key, v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn map_of(cfg: &ExperimentConfig) -> visunit::Result<Option<P2VMap>> {
    cfg.map.as_ref().map(|p| P2VMap::parse(&fs::read_to_string(p)?)).transpose()
}

fn check_fold(exp: &Experiment, k: usize) -> visunit::Result<()> {
    if k >= exp.plan.folds.len() {
        return Err(Error::Config(format!("fold {k} out of range (0..{})", exp.plan.folds.len())));
    }
    Ok(())
}

fn out_path(m: &ArgMatches, cfg: &ExperimentConfig, default: String) -> visunit::Result<PathBuf> {
    match m.get_one::<String>("out") {
        Some(p) => Ok(PathBuf::from(p)),
        None => {
            fs::create_dir_all(&cfg.output)?;
            Ok(cfg.output.join(default))
        }
    }
}

fn read_hypotheses(path: &Path) -> visunit::Result<Vec<(String, Vec<String>)>> {
    fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let mut it = l.split_whitespace();
            let id = it.next().unwrap_or_default().to_string();
            Ok((id, it.map(str::to_string).collect()))
        })
        .collect()
}

fn run(name: &str, m: &ArgMatches, cfg: ExperimentConfig) -> visunit::Result<()> {
    match name {
        "synth" => {
            let exp = Experiment::prepare(cfg)?;
            let out = &exp.cfg.output;
            fs::create_dir_all(out)?;
            write_corpus(&exp.corpus, out.join("corpus.txt"))?;
            fs::write(out.join("lexicon.txt"), exp.lex.to_text())?;
            if let Some(d) = &exp.design {
                fs::write(out.join("design.txt"), d.to_text())?;
            }
            println!("wrote {} utterances to {}", exp.corpus.len(), out.display());
        }
        "folds" => {
            let exp = Experiment::prepare(cfg)?;
            fs::create_dir_all(&exp.cfg.output)?;
            let path = exp.cfg.output.join("folds.txt");
            fs::write(&path, exp.plan.to_text())?;
            println!("wrote {} folds to {}", exp.plan.folds.len(), path.display());
        }
        "train" => {
            let exp = Experiment::prepare(cfg)?;
            let k = *m.get_one::<usize>("fold").expect("defaulted");
            check_fold(&exp, k)?;
            let map = map_of(&exp.cfg)?;
            let hierarchical = m.get_flag("hierarchical");
            let set = if hierarchical {
                let map = map.ok_or_else(|| Error::Config("hierarchical training needs 'map'".into()))?;
                let outcome = hierarchical_train(&exp.train_set(k), &map, &exp.lex, &exp.hierarchy_config())?;
                outcome.phoneme.set
            } else {
                exp.train(k, exp.cfg.classifier, map.as_ref(), Training::Flat)?
            };
            let path = out_path(m, &exp.cfg, format!("models_fold{k}.txt"))?;
            set.write(&path)?;
            println!("wrote {} models to {}", set.len(), path.display());
        }
        "decode" => {
            let exp = Experiment::prepare(cfg)?;
            let k = *m.get_one::<usize>("fold").expect("defaulted");
            check_fold(&exp, k)?;
            let set = HmmSet::read(m.get_one::<String>("models").expect("required"))?;
            let map = map_of(&exp.cfg)?;
            let hyps = exp.decode_fold(k, &set, exp.cfg.classifier, exp.cfg.network, map.as_ref())?;
            let mut text = String::new();
            for (id, labels) in &hyps {
                let _ = writeln!(text, "{id} {}", labels.join(" "));
            }
            let path = out_path(m, &exp.cfg, format!("hyp_fold{k}.txt"))?;
            fs::write(&path, text)?;
            println!("wrote {} hypotheses to {}", hyps.len(), path.display());
        }
        "score" => {
            let exp = Experiment::prepare(cfg)?;
            let k = *m.get_one::<usize>("fold").expect("defaulted");
            check_fold(&exp, k)?;
            let hyps = read_hypotheses(Path::new(m.get_one::<String>("hyp").expect("required")))?;
            let scoring = match m.get_one::<String>("scoring") {
                Some(s) => s.parse::<Granularity>().map_err(|e| Error::Config(e.to_string()))?,
                None => exp.cfg.network,
            };
            let map = map_of(&exp.cfg)?;
            let r = exp.score_fold(k, &hyps, exp.cfg.network, scoring, map.as_ref())?;
            let c = r.counts();
            let fmt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.4}"));
            println!("N={} D={} S={} I={} C={} Acc={}", c.n, c.d, c.s, c.i, fmt(c.correctness()), fmt(c.accuracy()));
        }
        "cluster" => {
            let k = ConfusionMatrix::read(m.get_one::<String>("confusions").expect("required"))?;
            let inv = visunit::lexicon::Inventory::british_english();
            let family = cluster_family(&k, &inv, cfg.seed)?;
            let dir = cfg.output.join("family");
            family.write_dir(&dir)?;
            println!("wrote maps of sizes {}..={} to {}", family.min_size(), family.max_size(), dir.display());
        }
        "discover" => {
            let exp = Experiment::prepare(cfg)?;
            let d = exp.run_discovery()?;
            for s in &d.summaries {
                println!("size {:>2}: C = {:.4} (ceiling {:.4})", s.map_size, s.mean, s.homophene_ceiling);
            }
        }
        "netstudy" => {
            let exp = Experiment::prepare(cfg)?;
            for s in exp.run_network_study()? {
                println!("{}/{}: C = {:.4} se {}", s.classifier, s.network, s.mean, se_text(s.se));
            }
        }
        "hierstudy" => {
            let exp = Experiment::prepare(cfg)?;
            for s in exp.run_hierarchical_study()? {
                println!(
                    "size {:>2} {} {}/{}: C = {:.4} se {}",
                    s.map_size,
                    s.training.name(),
                    s.classifier,
                    s.network,
                    s.mean,
                    se_text(s.se)
                );
            }
        }
        _ => unreachable!("clap rejects unknown subcommands"),
    }
    Ok(())
}

fn se_text(se: Option<f64>) -> String {
    se.map_or_else(|| "NA".to_string(), |s| format!("{s:.4}"))
}

fn main() -> ExitCode {
    let matches = command().get_matches();
    let level = match matches.get_count("verbose") {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let cfg = match load_config(sub) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(name, sub, cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
