//! Command-line front end binding schema loading, parsing, type checking, and
//! the evaluation, XQuery, SQL, and comprehension backends.
//!
//! Exit codes: 0 success, 1 query parse/type error (including schema and data
//! syntax), 2 backend precondition, 3 I/O.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use optica::ast::{check_query, elaborate_query};
use optica::compr::normalize::normalize;
use optica::compr::{build_nested_adapter, compr_query, print_compr, ComprExpr};
use optica::eval::{eval_query, ResultSet};
use optica::model::{
    load_schema, load_value_json, load_value_xml, shred, Cell, PkMap, Schema, Value,
};
use optica::parser::parse_query;
use optica::sql::exec::exec_sql;
use optica::sql::gen::gen_sql;
use optica::sql::print::print_sql;
use optica::sql::triplet::to_triplet;
use optica::xquery::xquery_of_query;
use optica::Quote;

#[derive(Parser)]
#[command(
    name = "optica",
    version,
    about = "Optic queries over nested data: check, evaluate, and translate to XQuery, SQL, or comprehensions"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse and type-check a query, printing its inferred type
    Check(Common),
    /// Evaluate a query against a data document
    Eval(Common),
    /// Print the XQuery translation of a query
    EmitXquery(Common),
    /// Print the SQL translation of a query
    EmitSql(Common),
    /// Print the comprehension translation of a query
    EmitCompr(Common),
    /// Translate a query to SQL, shred the document, and run the statement
    ExecSql(Common),
}

impl Cmd {
    fn common(&self) -> &Common {
        match self {
            Cmd::Check(c)
            | Cmd::Eval(c)
            | Cmd::EmitXquery(c)
            | Cmd::EmitSql(c)
            | Cmd::EmitCompr(c)
            | Cmd::ExecSql(c) => c,
        }
    }
}

#[derive(Args)]
struct Common {
    /// Query text, or `-` to read it from stdin
    query: String,
    /// Schema file
    #[arg(long, value_name = "FILE")]
    schema: PathBuf,
    /// Data document, XML or JSON by extension; needed by eval and exec-sql
    #[arg(long, value_name = "FILE")]
    data: Option<PathBuf>,
    /// Primary-key override; may repeat
    #[arg(long = "pk", value_name = "ENTITY=COLUMN")]
    pk: Vec<String>,
    /// Quote style for emitted string literals
    #[arg(long, value_enum, default_value_t = QuoteArg::Double)]
    quote: QuoteArg,
    /// Normalize the comprehension before printing
    #[arg(long)]
    normalize: bool,
    /// Compose the comprehension with the flat-to-nested adapter
    #[arg(long)]
    adapt: bool,
    /// Also print the intermediate representation, `#`-prefixed
    #[arg(long)]
    dump: bool,
}

impl Common {
    fn quote(&self) -> Quote {
        match self.quote {
            QuoteArg::Double => Quote::Double,
            QuoteArg::Single => Quote::Single,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum QuoteArg {
    Double,
    Single,
}

/// A classified failure; the variant fixes the exit code.
enum Failure {
    /// Query, schema, or data does not parse or type-check (exit 1).
    Lang(String),
    /// A backend precondition rejected the query (exit 2).
    Backend(String),
    /// Files or streams could not be read, or are missing (exit 3).
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Lang(_) => 1,
            Failure::Backend(_) => 2,
            Failure::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Lang(m) | Failure::Backend(m) | Failure::Io(m) => m,
        }
    }
}

fn lang(e: impl std::fmt::Display) -> Failure {
    Failure::Lang(e.to_string())
}

fn backend(e: impl std::fmt::Display) -> Failure {
    Failure::Backend(e.to_string())
}

pub fn run(args: &[String], out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    let mut argv = Vec::with_capacity(args.len() + 1);
    argv.push("optica".to_string());
    argv.extend_from_slice(args);
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render();
            return if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{rendered}");
                0
            } else {
                let _ = write!(err, "{rendered}");
                2
            };
        }
    };
    match dispatch(&cli) {
        Ok(text) => {
            let _ = write!(out, "{text}");
            0
        }
        Err(failure) => {
            let _ = writeln!(err, "optica: {}", failure.message());
            failure.code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<String, Failure> {
    let c = cli.cmd.common();
    let schema = load_schema(&read_file(&c.schema)?).map_err(lang)?;
    let raw = parse_query(&query_text(c)?).map_err(lang)?;

    if let Cmd::Check(_) = cli.cmd {
        let scheme = check_query(&raw, &schema).map_err(lang)?;
        return Ok(format!("{scheme}\n"));
    }

    let q = elaborate_query(&raw, &schema).map_err(lang)?;
    match &cli.cmd {
        Cmd::Check(_) => unreachable!("handled above"),
        Cmd::Eval(_) => {
            let data = load_data(c, &schema)?;
            Ok(format!("{}\n", render_result(&eval_query(&schema, &q, &data))))
        }
        Cmd::EmitXquery(_) => Ok(format!("{}\n", xquery_of_query(&schema, &q, c.quote()))),
        Cmd::EmitSql(_) => {
            let pk = pk_map(c, &schema)?;
            let sql = gen_sql(&schema, &pk, &q).map_err(backend)?;
            let mut text = String::new();
            if c.dump {
                text.push_str(&format!("# {:?}\n", to_triplet(&schema, &q)));
            }
            text.push_str(&print_sql(&sql, c.quote()));
            text.push('\n');
            Ok(text)
        }
        Cmd::EmitCompr(_) => {
            let mut term = compr_query(&schema, &q);
            if c.adapt {
                let pk = pk_map(c, &schema)?;
                let adapter = build_nested_adapter(&schema, &pk).map_err(backend)?;
                term = ComprExpr::App(Box::new(term), Box::new(adapter));
            }
            let mut text = String::new();
            if c.dump && c.normalize {
                text.push_str(&format!("# {}\n", print_compr(&term)));
            }
            if c.normalize {
                term = normalize(&term).map_err(backend)?;
            }
            text.push_str(&print_compr(&term));
            text.push('\n');
            Ok(text)
        }
        Cmd::ExecSql(_) => {
            let pk = pk_map(c, &schema)?;
            let sql = gen_sql(&schema, &pk, &q).map_err(backend)?;
            let data = load_data(c, &schema)?;
            let db = shred(&data, &schema, &pk).map_err(backend)?;
            let rows = exec_sql(&db, &sql).map_err(backend)?;
            let mut text = String::new();
            if c.dump {
                text.push_str(&format!("# {}\n", print_sql(&sql, c.quote())));
            }
            for row in &rows {
                text.push_str(&render_row(row));
                text.push('\n');
            }
            Ok(text)
        }
    }
}

fn read_file(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::Io(format!("cannot read `{}`: {e}", path.display())))
}

fn query_text(c: &Common) -> Result<String, Failure> {
    if c.query != "-" {
        return Ok(c.query.clone());
    }
    let mut text = String::new();
    std::io::stdin()
        .read_to_string(&mut text)
        .map_err(|e| Failure::Io(format!("cannot read stdin: {e}")))?;
    Ok(text)
}

fn load_data(c: &Common, schema: &Schema) -> Result<Value, Failure> {
    let path = c
        .data
        .as_ref()
        .ok_or_else(|| Failure::Io("this command needs --data".into()))?;
    let text = read_file(path)?;
    let json = path.extension().is_some_and(|ext| ext.eq_ignore_ascii_case("json"));
    if json {
        load_value_json(&text, schema).map_err(lang)
    } else {
        load_value_xml(&text, schema).map_err(lang)
    }
}

/// The schema's primary keys with `--pk` overrides applied on top.
fn pk_map(c: &Common, schema: &Schema) -> Result<PkMap, Failure> {
    let mut pk = schema.pk_map().clone();
    for entry in &c.pk {
        let (entity, column) = entry
            .split_once('=')
            .filter(|(e, col)| !e.is_empty() && !col.is_empty())
            .ok_or_else(|| lang(format!("malformed --pk `{entry}`, expected ENTITY=COLUMN")))?;
        pk.insert(entity.to_string(), column.to_string());
    }
    Ok(pk)
}

fn render_result(result: &ResultSet) -> String {
    match result {
        ResultSet::One(v) => v.to_string(),
        ResultSet::Opt(None) => "none".into(),
        ResultSet::Opt(Some(v)) => format!("some {v}"),
        ResultSet::Many(vs) => {
            let items: Vec<String> = vs.iter().map(Value::to_string).collect();
            format!("[{}]", items.join(","))
        }
    }
}

fn render_row(row: &[Cell]) -> String {
    let cell = |c: &Cell| match c {
        Some(v) => v.to_string(),
        None => "NULL".into(),
    };
    match row {
        [single] => cell(single),
        _ => {
            let cells: Vec<String> = row.iter().map(cell).collect();
            format!("({})", cells.join(","))
        }
    }
}
