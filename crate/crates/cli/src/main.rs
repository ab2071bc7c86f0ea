//! `arc`: parse, check, evaluate, translate, render and compare queries.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use arc_core::corpus::{default_corpus_dir, run_corpus};
use arc_core::{
    analyze, canonicalize, classify_aggregation, evaluate_program, first_difference, parse_arc,
    parse_sql, print_arc, serialize_alt, to_dot, to_higraph, Answer, CollectionSemantics,
    Conventions, Database, EmptyAggregate, ExternalRegistry, LinkedProgram, Program, RenderOptions,
    SqlTranslator,
};
use clap::{Parser, Subcommand, ValueEnum};

mod demo;

#[derive(Parser)]
#[command(name = "arc", version, about = "Abstract Relational Calculus toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the ALT of a query as JSON.
    Parse { file: PathBuf },
    /// Bind a query and report diagnostics.
    Check { file: PathBuf },
    /// Evaluate a query (`.arc` or `.sql`) over a JSON database.
    Eval {
        file: PathBuf,
        #[arg(long)]
        db: PathBuf,
        #[command(flatten)]
        conv: ConventionArgs,
        #[arg(long, value_enum, default_value_t = Out::Table)]
        out: Out,
    },
    /// Translate SQL into the calculus.
    FromSql {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = Emit::Arc)]
        emit: Emit,
        /// Database whose schemas resolve unqualified columns.
        #[arg(long)]
        db: Option<PathBuf>,
    },
    /// Render the higraph of a query.
    Render {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Dot)]
        format: Format,
        /// Abstract relation to draw as a single module box.
        #[arg(long)]
        collapse: Vec<String>,
    },
    /// Compare the relational patterns of two queries; exits 1 when they differ.
    Diff { left: PathBuf, right: PathBuf },
    /// Label each aggregation scope FIO or FOI.
    Classify { file: PathBuf },
    /// Run a built-in demonstration.
    Demo {
        #[arg(value_enum)]
        name: demo::Demo,
    },
    /// Run the fixture corpus.
    Corpus {
        /// Glob over fixture ids.
        #[arg(default_value = "")]
        filter: String,
        #[arg(long)]
        root: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct ConventionArgs {
    /// Base convention set.
    #[arg(long, value_enum, default_value_t = Base::Sql)]
    conventions: Base,
    #[arg(long, value_parser = parse_semantics)]
    semantics: Option<CollectionSemantics>,
    #[arg(long = "agg-empty", value_parser = parse_agg_empty)]
    agg_empty: Option<EmptyAggregate>,
    #[arg(long = "fixpoint-cap")]
    fixpoint_cap: Option<u32>,
}

fn parse_semantics(s: &str) -> Result<CollectionSemantics, String> {
    s.parse()
        .map_err(|e: arc_core::conventions::ConventionError| e.to_string())
}

fn parse_agg_empty(s: &str) -> Result<EmptyAggregate, String> {
    s.parse()
        .map_err(|e: arc_core::conventions::ConventionError| e.to_string())
}

#[derive(Clone, Copy, ValueEnum)]
enum Base {
    Sql,
    Souffle,
}

#[derive(Clone, Copy, ValueEnum)]
enum Out {
    Table,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Emit {
    Arc,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Dot,
    Json,
}

/// A failure already explained on stderr.
struct Failed;

type Run = Result<(), Failed>;

fn fail(msg: impl std::fmt::Display) -> Failed {
    eprintln!("{msg}");
    Failed
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failed) => ExitCode::from(1),
    }
}

fn run(cmd: Command) -> Run {
    let registry = ExternalRegistry::from_env().map_err(fail)?;
    match cmd {
        Command::Parse { file } => {
            let p = load_program(&file, &registry)?;
            println!("{}", serialize_alt(&p));
            Ok(())
        }
        Command::Check { file } => {
            let p = load_program(&file, &registry)?;
            match analyze(&p, &registry) {
                Ok(lp) => {
                    for w in &lp.warnings {
                        println!("{w}");
                    }
                    println!("ok");
                    Ok(())
                }
                Err(ds) => {
                    for d in &ds {
                        println!("{d}");
                    }
                    Err(Failed)
                }
            }
        }
        Command::Eval {
            file,
            db,
            conv,
            out,
        } => {
            let p = load_program(&file, &registry)?;
            let db = load_db(&db)?;
            let conv = conventions(&conv)?;
            let answer = evaluate_program(&p, &registry, &db, &conv).map_err(fail)?;
            match (answer, out) {
                (Answer::Rows(r), Out::Json) => {
                    println!(
                        "{}",
                        serde_json::to_string_pretty(&r.to_json()).expect("relation serializes")
                    )
                }
                (answer, _) => print!("{answer}"),
            }
            Ok(())
        }
        Command::FromSql { file, emit, db } => {
            let text = read(&file)?;
            let ast = parse_sql(&text).map_err(fail)?;
            let schemas = db.as_deref().map(load_db).transpose()?;
            let mut tr = SqlTranslator::new(&registry);
            if let Some(d) = &schemas {
                tr = tr.with_schemas(d);
            }
            let t = tr.translate(&ast).map_err(fail)?;
            for w in &t.warnings {
                eprintln!("{w}");
            }
            match emit {
                Emit::Arc => print!("{}", ensure_newline(print_arc(&t.program))),
                Emit::Json => println!("{}", serialize_alt(&t.program)),
            }
            Ok(())
        }
        Command::Render {
            file,
            format,
            collapse,
        } => {
            let lp = load_linked(&file, &registry)?;
            let doc = to_higraph(
                &lp,
                &RenderOptions {
                    collapse: collapse.into_iter().collect(),
                },
            );
            match format {
                Format::Dot => print!("{}", to_dot(&doc)),
                Format::Json => println!(
                    "{}",
                    serde_json::to_string_pretty(&doc.to_json()).expect("document serializes")
                ),
            }
            Ok(())
        }
        Command::Diff { left, right } => {
            let a = canonicalize(&load_linked(&left, &registry)?);
            let b = canonicalize(&load_linked(&right, &registry)?);
            match first_difference(&a, &b) {
                None => {
                    println!("patterns equal");
                    Ok(())
                }
                Some(d) => {
                    println!("patterns differ");
                    println!("{d}");
                    Err(Failed)
                }
            }
        }
        Command::Classify { file } => {
            let lp = load_linked(&file, &registry)?;
            let found = classify_aggregation(&lp);
            if found.is_empty() {
                println!("no aggregation scopes");
            }
            for (id, pat) in found {
                let q = lp
                    .quantifiers()
                    .into_iter()
                    .find(|q| q.meta.id == id)
                    .expect("classified scope exists");
                let vars: Vec<&str> = q.bindings.iter().map(|b| b.var.as_str()).collect();
                let keys: Vec<String> = q
                    .grouping
                    .iter()
                    .flat_map(|g| g.keys.iter())
                    .map(|k| format!("{}.{}", k.var, k.attr))
                    .collect();
                println!(
                    "{pat}  {}  group({}) over {}",
                    q.meta.span,
                    keys.join(", "),
                    vars.join(", ")
                );
            }
            Ok(())
        }
        Command::Demo { name } => {
            print!("{}", demo::run(name).map_err(fail)?);
            Ok(())
        }
        Command::Corpus { filter, root } => {
            let root = root.unwrap_or_else(default_corpus_dir);
            let report = run_corpus(&root, &filter).map_err(fail)?;
            print!("{report}");
            if report.all_passed() {
                Ok(())
            } else {
                Err(Failed)
            }
        }
    }
}

fn ensure_newline(mut s: String) -> String {
    if !s.ends_with('\n') {
        s.push('\n');
    }
    s
}

fn read(path: &Path) -> Result<String, Failed> {
    fs::read_to_string(path).map_err(|e| fail(format!("{}: {e}", path.display())))
}

fn load_db(path: &Path) -> Result<Database, Failed> {
    Database::from_json(&read(path)?).map_err(|e| fail(format!("{}: {e}", path.display())))
}

/// Reads `.sql` files through the translator and anything else as calculus text.
fn load_program(path: &Path, registry: &ExternalRegistry) -> Result<Program, Failed> {
    let text = read(path)?;
    if path.extension().is_some_and(|e| e == "sql") {
        let ast = parse_sql(&text).map_err(fail)?;
        let t = SqlTranslator::new(registry).translate(&ast).map_err(fail)?;
        Ok(t.program)
    } else {
        parse_arc(&text).map_err(fail)
    }
}

fn load_linked(path: &Path, registry: &ExternalRegistry) -> Result<LinkedProgram, Failed> {
    let p = load_program(path, registry)?;
    analyze(&p, registry).map_err(|ds| {
        for d in &ds {
            eprintln!("{d}");
        }
        Failed
    })
}

fn conventions(args: &ConventionArgs) -> Result<Conventions, Failed> {
    let mut c = match args.conventions {
        Base::Sql => Conventions::sql(),
        Base::Souffle => Conventions::souffle(),
    };
    if let Some(s) = args.semantics {
        c = c.with_semantics(s);
    }
    if let Some(e) = args.agg_empty {
        c = c.with_empty_aggregate(e);
    }
    if let Some(n) = args.fixpoint_cap {
        c = c.with_fixpoint_cap(n).map_err(fail)?;
    }
    Ok(c)
}
