//! Numerical calculator.
//!
//! The generator is asked for arithmetic expressions; each one is parsed in a
//! closed grammar (numbers, `+ - * / // % **`, comparisons, parentheses and
//! `min max sum abs round`) and evaluated over `f64` with Python's operator
//! semantics. Nothing outside the grammar can reach the evaluator.

mod eval;
mod parser;

pub use eval::{py_floordiv, py_mod, py_pow, py_round, MAX_EXPONENT};
pub use parser::{MAX_DEPTH, MAX_NODES};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::MarkdownTable;
use crate::provider::{GenerationRequest, Generator};
use crate::retrieval::ScoredChunk;

pub const CALC_SAMPLES: usize = 5;
pub const DEFAULT_CALC_TABLE_BUDGET: usize = 6000;
const CALC_TEMPERATURE: f64 = 0.7;
const CALC_MAX_TOKENS: usize = 128;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalcError {
    #[error("empty expression")]
    Empty,
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("forbidden construct: {0}")]
    Forbidden(String),
    #[error("nesting depth exceeds {0}")]
    DepthExceeded(usize),
    #[error("expression exceeds {0} nodes")]
    TooManyNodes(usize),
    #[error("arithmetic error: {0}")]
    Arithmetic(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    FloorDiv,
    Mod,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Min,
    Max,
    Sum,
    Abs,
    Round,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "min" => Func::Min,
            "max" => Func::Max,
            "sum" => Func::Sum,
            "abs" => Func::Abs,
            "round" => Func::Round,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Min => "min",
            Func::Max => "max",
            Func::Sum => "sum",
            Func::Abs => "abs",
            Func::Round => "round",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    /// Python-style chained comparison: `a < b <= c`.
    Compare(Box<Expr>, Vec<(CmpOp, Expr)>),
    Call(Func, Vec<Arg>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Arg {
    Expr(Expr),
    List(Vec<Expr>),
}

impl Expr {
    pub fn node_count(&self) -> usize {
        match self {
            Expr::Num(_) => 1,
            Expr::Neg(e) => 1 + e.node_count(),
            Expr::Bin(_, l, r) => 1 + l.node_count() + r.node_count(),
            Expr::Compare(f, rest) => 1 + f.node_count() + rest.iter().map(|(_, e)| e.node_count()).sum::<usize>(),
            Expr::Call(_, args) => {
                1 + args
                    .iter()
                    .map(|a| match a {
                        Arg::Expr(e) => e.node_count(),
                        Arg::List(items) => 1 + items.iter().map(Expr::node_count).sum::<usize>(),
                    })
                    .sum::<usize>()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Num(f64),
    Bool(bool),
}

impl Value {
    pub fn as_f64(self) -> f64 {
        match self {
            Value::Num(v) => v,
            Value::Bool(b) => f64::from(u8::from(b)),
        }
    }

    pub fn render(self) -> String {
        match self {
            Value::Bool(true) => "True".into(),
            Value::Bool(false) => "False".into(),
            Value::Num(v) => format_number(v),
        }
    }
}

/// A parsed expression together with its source text.
#[derive(Debug, Clone, PartialEq)]
pub struct CalcExpr {
    pub source: String,
    pub ast: Expr,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalcResult {
    pub source: String,
    pub value: String,
}

/// `%.12g`: twelve significant digits, trailing zeros dropped, scientific
/// notation outside `1e-4 <= |v| < 1e12`.
pub fn format_number(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..12).contains(&exp) {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (11 - exp).max(0) as usize;
        strip_zeros(&format!("{v:.decimals$}"))
    }
}

fn strip_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// Removes a surrounding Markdown code fence or backticks, if any.
pub fn strip_fences(s: &str) -> &str {
    let mut t = s.trim();
    if let Some(rest) = t.strip_prefix("```") {
        let rest = rest.strip_prefix("python").unwrap_or(rest);
        t = rest.strip_suffix("```").unwrap_or(rest).trim();
    } else if t.len() >= 2 && t.starts_with('`') && t.ends_with('`') {
        t = t[1..t.len() - 1].trim();
    }
    t
}

pub fn parse_expr(source: &str) -> Result<CalcExpr, CalcError> {
    let ast = parser::parse(source)?;
    Ok(CalcExpr { source: source.trim().to_string(), ast })
}

pub fn eval_expr(expr: &CalcExpr) -> Result<CalcResult, CalcError> {
    let value = eval::eval(&expr.ast)?;
    Ok(CalcResult { source: expr.source.clone(), value: value.render() })
}

/// Parses and evaluates, returning the raw value.
pub fn evaluate(source: &str) -> Result<Value, CalcError> {
    eval::eval(&parser::parse(source)?)
}

const CALC_RULES: &str = "1. The expression **MUST** be a valid Python expression.
2. The expression **MUST** be useful to answer the question.
3. If you think no expression is needed, you **MUST** answer with empty string.
4. The output should be succinct, you **MUST** do reasoning in your heart without outputing the reasoning.
5. You **MUST NOT** output any other words except the valid Python expression.
6. You **MUST NOT** output the expression that need the user to input anything.
";

pub fn calc_system_prompt() -> String {
    format!(
        "You are provided with a question and various references. Your task is to generate a possible useful expression that is needed to answer the question. Here are the rules:\n{CALC_RULES}"
    )
}

/// Renders `- snippet` bullets under `# References`, or nothing.
pub(crate) fn render_references(chunks: &[ScoredChunk]) -> String {
    let mut references = String::new();
    if !chunks.is_empty() {
        references.push_str("# References \n");
        for c in chunks {
            references.push_str(&format!("- {}\n", c.chunk.text.trim()));
        }
    }
    references
}

/// `### Table i:` blocks concatenated and cut to `budget` characters.
pub(crate) fn render_tables(tables: &[MarkdownTable], budget: usize) -> String {
    let mut s = String::new();
    for (i, t) in tables.iter().enumerate() {
        s.push_str(&format!("### Table {}: \n{}\n", i + 1, t.markdown));
    }
    s.chars().take(budget).collect()
}

pub fn build_calc_prompt(
    query: &str,
    chunks: &[ScoredChunk],
    tables: &[MarkdownTable],
    table_budget: usize,
) -> GenerationRequest {
    let mut user = String::new();
    user.push_str(&render_references(chunks));
    user.push_str("\n------\n\n");
    if !tables.is_empty() {
        user.push_str("## Table references \n");
        user.push_str(&render_tables(tables, table_budget));
        user.push_str("\n------\n\n");
    }
    user.push_str("**Remember your rules**:\n");
    user.push_str(CALC_RULES);
    user.push_str(&format!("Question: {query}\n"));
    user.push_str("Using the references listed above and based on the question, generate a valid Python expression for me: \n");
    GenerationRequest::new(calc_system_prompt(), user)
        .with_samples(CALC_SAMPLES)
        .with_temperature(CALC_TEMPERATURE)
        .with_max_tokens(CALC_MAX_TOKENS)
}

/// Turns sampled completions into distinct calculation results. Unparsable,
/// empty and failing expressions are dropped.
pub fn evaluate_samples(completions: &[String]) -> Vec<CalcResult> {
    let mut out: Vec<CalcResult> = Vec::new();
    for c in completions {
        let src = strip_fences(c);
        let Ok(expr) = parse_expr(src) else { continue };
        let Ok(result) = eval_expr(&expr) else { continue };
        if !out.contains(&result) {
            out.push(result);
        }
    }
    out
}

/// Samples expressions from the generator and evaluates the valid ones.
/// Provider failures yield no results.
pub fn run_calculator(
    query: &str,
    chunks: &[ScoredChunk],
    tables: &[MarkdownTable],
    table_budget: usize,
    provider: &dyn Generator,
) -> Vec<CalcResult> {
    let req = build_calc_prompt(query, chunks, tables, table_budget);
    match provider.generate(&req) {
        Ok(r) => evaluate_samples(&r.completions),
        Err(e) => {
            log::warn!("calculator generation failed: {e}");
            Vec::new()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{ChunkKind, TextChunk};
    use crate::provider::ScriptedGenerator;

    fn val(s: &str) -> String {
        evaluate(s).map(Value::render).unwrap_or_else(|e| format!("ERR {e}"))
    }

    #[test]
    fn precedence() {
        assert_eq!(val("2+2*3"), "8");
        assert_eq!(val("(2+2)*3"), "12");
        assert_eq!(val("-2**2"), "-4");
        assert_eq!(val("2**-1"), "0.5");
        assert_eq!(val("2**3**2"), "512");
        assert_eq!(val("10-4-3"), "3");
        assert_eq!(val("2*3 > 5"), "True");
    }

    #[test]
    fn spec_examples() {
        assert_eq!(val("3.9 > 3.11"), "True");
        assert_eq!(val("2**10"), "1024");
        assert_eq!(val("7 // 2"), "3");
        assert!(matches!(evaluate("1/0"), Err(CalcError::Arithmetic(_))));
        assert_eq!(val("max(142.5, 139.8)"), "142.5");
    }

    #[test]
    fn python_floor_and_mod_signs() {
        assert_eq!(val("-7 // 2"), "-4");
        assert_eq!(val("7 // -2"), "-4");
        assert_eq!(val("-7 % 3"), "2");
        assert_eq!(val("7 % -3"), "-2");
        assert_eq!(val("7.5 % 2"), "1.5");
        assert!(matches!(evaluate("5 % 0"), Err(CalcError::Arithmetic(_))));
        assert!(matches!(evaluate("5 // 0.0"), Err(CalcError::Arithmetic(_))));
    }

    #[test]
    fn functions() {
        assert_eq!(val("min([3, 1, 2])"), "1");
        assert_eq!(val("max(1, 5, 2)"), "5");
        assert_eq!(val("sum([1.5, 2.5, 3])"), "7");
        assert_eq!(val("sum([1, 2], 10)"), "13");
        assert_eq!(val("abs(-3.25)"), "3.25");
        assert_eq!(val("round(2.5)"), "2");
        assert_eq!(val("round(3.5)"), "4");
        assert_eq!(val("round(-0.5)"), "0");
        assert_eq!(val("round(3.14159, 2)"), "3.14");
        assert_eq!(val("round(1234, -2)"), "1200");
        assert_eq!(val("sum([])"), "0");
        assert!(matches!(evaluate("min([])"), Err(CalcError::Arithmetic(_))));
        assert!(matches!(evaluate("abs(1, 2)"), Err(CalcError::Arithmetic(_))));
        assert!(matches!(evaluate("round(1.5, 0.5)"), Err(CalcError::Arithmetic(_))));
    }

    #[test]
    fn chained_comparisons() {
        assert_eq!(val("1 < 2 < 3"), "True");
        assert_eq!(val("1 < 3 < 2"), "False");
        assert_eq!(val("2 == 2.0 != 3"), "True");
        assert_eq!(val("(1 < 2) + 1"), "2");
    }

    #[test]
    fn literals() {
        assert_eq!(val("1_000 * 2"), "2000");
        assert_eq!(val(".5 + 5."), "5.5");
        assert_eq!(val("1e3"), "1000");
        assert_eq!(val("2.5E-3"), "0.0025");
        assert!(matches!(evaluate("1__0"), Err(CalcError::Syntax(_))));
        assert!(matches!(evaluate("1e999"), Err(CalcError::Arithmetic(_))));
    }

    #[test]
    fn arithmetic_errors() {
        assert!(matches!(evaluate("10.0 ** 400"), Err(CalcError::Arithmetic(_))));
        assert!(matches!(evaluate("2 ** 1000001"), Err(CalcError::Arithmetic(_))));
        assert!(matches!(evaluate("0 ** -1"), Err(CalcError::Arithmetic(_))));
        assert!(matches!(evaluate("(-8) ** 0.5"), Err(CalcError::Arithmetic(_))));
        assert!(matches!(evaluate("1e308 * 10"), Err(CalcError::Arithmetic(_))));
    }

    #[test]
    fn forbidden_constructs() {
        for src in [
            "__import__('os')",
            "os.system('ls')",
            "x",
            "x + 1",
            "lambda: 1",
            "(1).real",
            "[1, 2][0]",
            "[1, 2]",
            "a = 1",
            "max",
            "exec(1)",
            "min(1)(2)",
            "1 if 1 else 2",
            "True",
            "1, 2",
            "'1' + '2'",
            "1 & 1",
            "{1: 2}",
            "sum([1])[0]",
        ] {
            assert!(
                matches!(parse_expr(src), Err(CalcError::Forbidden(_))),
                "{src}: {:?}",
                parse_expr(src)
            );
        }
    }

    #[test]
    fn syntax_errors() {
        for src in ["1 +", "(1", "1 2", "max(1,", "*3", "1 ** ", "$"] {
            assert!(matches!(parse_expr(src), Err(CalcError::Syntax(_))), "{src}");
        }
    }

    #[test]
    fn empty_source() {
        assert_eq!(parse_expr(""), Err(CalcError::Empty));
        assert_eq!(parse_expr("  \n "), Err(CalcError::Empty));
    }

    #[test]
    fn limits() {
        let deep = format!("{}1{}", "(".repeat(40), ")".repeat(40));
        assert_eq!(parse_expr(&deep), Err(CalcError::DepthExceeded(MAX_DEPTH)));
        let negs = format!("{}1", "-".repeat(100));
        assert_eq!(parse_expr(&negs), Err(CalcError::DepthExceeded(MAX_DEPTH)));
        let ok = format!("{}1{}", "(".repeat(20), ")".repeat(20));
        assert!(parse_expr(&ok).is_ok());
        let wide = vec!["1"; 600].join("+");
        assert_eq!(parse_expr(&wide), Err(CalcError::TooManyNodes(MAX_NODES)));
        let fits = vec!["1"; 200].join("+");
        let e = parse_expr(&fits).unwrap();
        assert!(e.ast.node_count() <= MAX_NODES);
    }

    #[test]
    fn whitespace_insensitive() {
        assert_eq!(val(" 1\n+\t2 "), "3");
    }

    #[test]
    fn number_formatting() {
        assert_eq!(format_number(1024.0), "1024");
        assert_eq!(format_number(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_number(-2.5), "-2.5");
        assert_eq!(format_number(1e20), "1e+20");
        assert_eq!(format_number(123456789012.0), "123456789012");
        assert_eq!(format_number(1234567890123.0), "1.23456789012e+12");
        assert_eq!(format_number(0.0001), "0.0001");
        assert_eq!(format_number(0.00001234), "1.234e-05");
        assert_eq!(format_number(-0.0), "0");
        assert_eq!(format_number(0.1 + 0.2), "0.3");
    }

    #[test]
    fn fences_stripped() {
        assert_eq!(strip_fences("```python\n1+1\n```"), "1+1");
        assert_eq!(strip_fences("`2*3`"), "2*3");
        assert_eq!(strip_fences(" 4 "), "4");
    }

    fn scored(t: &str) -> ScoredChunk {
        ScoredChunk {
            chunk: TextChunk {
                text: t.into(),
                source_page: "p".into(),
                kind: ChunkKind::Plain,
                first_sentence: 0,
                sentence_count: 1,
            },
            score: 1.0,
        }
    }

    #[test]
    fn prompt_sections() {
        let empty = build_calc_prompt("q?", &[], &[], DEFAULT_CALC_TABLE_BUDGET);
        assert!(!empty.user_prompt.contains("# References"));
        assert!(!empty.user_prompt.contains("## Table references"));
        assert_eq!(empty.n_samples, 5);
        assert!(empty.system_prompt.contains("The expression **MUST** be a valid Python expression."));
        assert!(empty.user_prompt.ends_with(
            "Question: q?\nUsing the references listed above and based on the question, generate a valid Python expression for me: \n"
        ));

        let one = build_calc_prompt("q?", &[scored("  A fact. ")], &[], DEFAULT_CALC_TABLE_BUDGET);
        assert!(one.user_prompt.starts_with("# References \n- A fact.\n\n------\n\n"));
        assert_eq!(one.user_prompt.matches("\n- ").count(), 1);

        let big = MarkdownTable { markdown: "x".repeat(10_000), source_page: "p".into() };
        let tabled = build_calc_prompt("q?", &[], &[big], 6000);
        let start = tabled.user_prompt.find("## Table references \n").unwrap() + "## Table references \n".len();
        let end = tabled.user_prompt[start..].find("\n------").unwrap() + start;
        assert_eq!(tabled.user_prompt[start..end].chars().count(), 6000);
    }

    #[test]
    fn pipeline_keeps_valid_distinct_results() {
        let mut g = ScriptedGenerator::default();
        let req = build_calc_prompt("q", &[], &[], DEFAULT_CALC_TABLE_BUDGET);
        g.insert_for(
            &req,
            ["2+2", "import os", "", "2+2", "10/4"].iter().map(|s| s.to_string()).collect(),
        );
        let out = run_calculator("q", &[], &[], DEFAULT_CALC_TABLE_BUDGET, &g);
        assert_eq!(
            out,
            vec![
                CalcResult { source: "2+2".into(), value: "4".into() },
                CalcResult { source: "10/4".into(), value: "2.5".into() },
            ]
        );
    }

    #[test]
    fn all_empty_samples() {
        let mut g = ScriptedGenerator::default();
        let req = build_calc_prompt("q", &[], &[], DEFAULT_CALC_TABLE_BUDGET);
        g.insert_for(&req, vec![String::new(); 5]);
        assert!(run_calculator("q", &[], &[], DEFAULT_CALC_TABLE_BUDGET, &g).is_empty());
    }

    #[test]
    fn provider_failure_degrades() {
        let g = ScriptedGenerator::default();
        assert!(run_calculator("q", &[], &[], DEFAULT_CALC_TABLE_BUDGET, &g).is_empty());
    }
}
