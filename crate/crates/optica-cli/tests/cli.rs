use std::io::Write;
use std::process::{Command, Stdio};

use optica_cli::run;

const DIFFERENCES: &str = "getAll(couples >>> filtered(fst >>> age > snd >>> age) \
                           >>> ((fst >>> name) *** (fst >>> age - snd >>> age)))";
const EXPERTISE: &str = "getAll(departments >>> \
                         filtered(all(employees, elem(tasks >>> tsk, \"abstract\"))) >>> dpt)";

fn data(file: &str) -> String {
    format!("{}/../optica/tests/data/{file}", env!("CARGO_MANIFEST_DIR"))
}

fn optica(args: &[&str]) -> (u8, String, String) {
    let args: Vec<String> = args.iter().map(|s| s.to_string()).collect();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(&args, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn check_prints_the_inferred_query_type() {
    let (code, out, _) = optica(&["check", DIFFERENCES, "--schema", &data("couples.schema")]);
    assert_eq!(code, 0);
    assert_eq!(out, "CouplesDoc -> list (String, Int)\n");
}

#[test]
fn eval_prints_reference_answers() {
    let (code, out, _) = optica(&[
        "eval",
        DIFFERENCES,
        "--schema",
        &data("couples.schema"),
        "--data",
        &data("couples.xml"),
    ]);
    assert_eq!(code, 0);
    assert_eq!(out, "[(Alex,5),(Cora,2)]\n");

    let (code, out, _) = optica(&[
        "eval",
        EXPERTISE,
        "--schema",
        &data("org.schema"),
        "--data",
        &data("org.json"),
    ]);
    assert_eq!(code, 0);
    assert_eq!(out, "[Quality,Research]\n");
}

#[test]
fn emitters_print_one_statement_per_backend() {
    let (code, out, _) = optica(&["emit-xquery", DIFFERENCES, "--schema", &data("couples.schema")]);
    assert_eq!(code, 0);
    assert_eq!(
        out,
        "/xml/couple[fst/age > snd/age]\
         /<tuple><one>{fst/name}</one><two>{fst/age - snd/age}</two></tuple>\n"
    );

    let (code, out, _) = optica(&[
        "emit-sql",
        EXPERTISE,
        "--schema",
        &data("org.schema"),
        "--quote",
        "single",
    ]);
    assert_eq!(code, 0);
    assert!(out.contains("'abstract'") && out.ends_with(";\n"), "unexpected SQL: {out}");

    let (code, out, _) = optica(&[
        "emit-compr",
        EXPERTISE,
        "--schema",
        &data("org.schema"),
        "--adapt",
        "--normalize",
    ]);
    assert_eq!(code, 0);
    assert!(
        out.starts_with("for ") && out.contains("table(\"Department\")"),
        "unexpected comprehension: {out}"
    );
}

#[test]
fn exec_sql_streams_rows_and_dumps_the_statement_on_request() {
    let (code, out, _) = optica(&[
        "exec-sql",
        DIFFERENCES,
        "--schema",
        &data("couples.schema"),
        "--data",
        &data("couples.xml"),
        "--dump",
    ]);
    assert_eq!(code, 0);
    let mut lines = out.lines();
    assert!(lines.next().unwrap().starts_with("# SELECT "));
    assert_eq!(lines.collect::<Vec<_>>(), ["(Alex,5)", "(Cora,2)"]);
}

#[test]
fn pk_overrides_replace_join_columns() {
    let (code, out, _) = optica(&[
        "emit-sql",
        "getAll(couples >>> fst >>> name)",
        "--schema",
        &data("couples.schema"),
        "--pk",
        "Person=age",
    ]);
    assert_eq!(code, 0);
    assert!(out.contains("ON t0.fst = t1.age"), "override ignored: {out}");
}

#[test]
fn exit_codes_classify_failures() {
    let couples = data("couples.schema");
    let (code, _, err) = optica(&["check", "get(couples)", "--schema", &couples]);
    assert_eq!(code, 1, "kind mismatch is a type error: {err}");

    let (code, _, err) = optica(&["emit-sql", "getAll(couples)", "--schema", &couples]);
    assert_eq!(code, 2, "non-flat result is a backend refusal: {err}");

    let (code, _, err) = optica(&["check", "get(couples)", "--schema", "no-such-file.schema"]);
    assert_eq!(code, 3, "unreadable schema is an I/O error: {err}");

    let (code, _, err) = optica(&["eval", DIFFERENCES, "--schema", &couples]);
    assert_eq!(code, 3, "eval without --data is an I/O error: {err}");
}

#[test]
fn a_dash_query_is_read_from_stdin() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_optica"))
        .args(["eval", "-", "--schema", &data("couples.schema"), "--data", &data("couples.xml")])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(DIFFERENCES.as_bytes()).unwrap();
    let output = child.wait_with_output().unwrap();
    assert!(output.status.success());
    assert_eq!(String::from_utf8(output.stdout).unwrap(), "[(Alex,5),(Cora,2)]\n");
}
