//! A line-oriented plan language for describing experiments.
//!
//! One statement per line, `#` starts a comment, numbers accept exact
//! fractions like `1/3`. A plan fixes the signal and meter preparation, the
//! circuit configuration, exactly one action, and any file outputs:
//!
//! ```text
//! signal D+
//! meter dprime
//! eta 1/3
//! run
//! output json out.json
//! ```

use std::fmt;
use std::fmt::Write as _;

use crate::circuit::{
    prepare_meter, CircuitConfig, CircuitError, PolarizationQubit, StandardInput,
};

const STATEMENT_KEYWORDS: [&str; 9] = [
    "signal",
    "meter",
    "eta",
    "balanced_loss",
    "sweep",
    "table",
    "densmat",
    "run",
    "output",
];

const SIGNAL_NAMES: [&str; 6] = ["H", "V", "D+", "D-", "R+", "R-"];

/// A parse or validation failure pinned to a source position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    /// 1-based line.
    pub line: usize,
    /// 1-based character column.
    pub column: usize,
    pub message: String,
    pub expected: Vec<String>,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected {})", self.expected.join(", "))?;
        }
        Ok(())
    }
}

/// An exact numeric literal: either a rational kept as written or a decimal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Number {
    Rational { num: i64, den: i64 },
    Decimal(f64),
}

impl Number {
    pub fn value(&self) -> f64 {
        match self {
            Number::Rational { num, den } => *num as f64 / *den as f64,
            Number::Decimal(x) => *x,
        }
    }
}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Number::Rational { num, den } => write!(f, "{num}/{den}"),
            Number::Decimal(x) => write!(f, "{x}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SignalSpec {
    Named(StandardInput),
    State(Number, Number),
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeterSpec {
    DPrime,
    D(Number),
    State(Number, Number),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Run,
    Table,
    Densmat,
    Sweep {
        from: Number,
        to: Number,
        steps: u32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn keyword(&self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

/// A validated experiment description. Optional stanzas stay `None` when the
/// source omitted them; defaults are applied at resolution time.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub signal: Option<SignalSpec>,
    pub meter: Option<MeterSpec>,
    pub eta: Option<Number>,
    pub balanced_loss: Option<bool>,
    pub action: Action,
    pub outputs: Vec<(OutputFormat, String)>,
}

/// Everything the runner needs, with defaults applied and numbers lowered to
/// floating point.
#[derive(Debug, Clone)]
pub struct ResolvedExperiment {
    pub signal_label: String,
    pub signal: PolarizationQubit,
    pub meter: PolarizationQubit,
    pub config: CircuitConfig,
    pub action: ResolvedAction,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ResolvedAction {
    Run,
    Table,
    Densmat,
    Sweep { alphas: Vec<f64> },
}

impl ExperimentPlan {
    /// Applies defaults: meter `dprime`, eta 1/3, loss off; `sweep` and
    /// `densmat` fall back to the equal-superposition signal.
    pub fn resolve(&self) -> Result<ResolvedExperiment, CircuitError> {
        let eta = self.eta.map(|n| n.value()).unwrap_or(1.0 / 3.0);
        let config = CircuitConfig {
            eta,
            balanced_loss: self.balanced_loss.unwrap_or(false),
            ..CircuitConfig::strong()
        };
        let (signal_label, signal) = match &self.signal {
            Some(SignalSpec::Named(input)) => (input.label().to_string(), input.qubit()),
            Some(SignalSpec::State(h, v)) => (
                format!("state({h},{v})"),
                PolarizationQubit::normalized(h.value().into(), v.value().into())?,
            ),
            None => (
                "(|H>+|V>)/sqrt(2)".to_string(),
                PolarizationQubit::equal_superposition(),
            ),
        };
        let meter = match &self.meter {
            Some(MeterSpec::DPrime) | None => prepare_meter(1.0 / 3.0)?,
            Some(MeterSpec::D(n)) => prepare_meter(n.value())?,
            Some(MeterSpec::State(h, v)) => {
                PolarizationQubit::normalized(h.value().into(), v.value().into())?
            }
        };
        let action = match &self.action {
            Action::Run => ResolvedAction::Run,
            Action::Table => ResolvedAction::Table,
            Action::Densmat => ResolvedAction::Densmat,
            Action::Sweep { from, to, steps } => {
                let (lo, hi, n) = (from.value(), to.value(), *steps as usize);
                let alphas = (0..n)
                    .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                    .collect();
                ResolvedAction::Sweep { alphas }
            }
        };
        Ok(ResolvedExperiment {
            signal_label,
            signal,
            meter,
            config,
            action,
        })
    }
}

/// Canonical text form; `parse(print_plan(p))` reproduces `p` structurally.
/// Comments are not represented and are dropped.
pub fn print_plan(plan: &ExperimentPlan) -> String {
    let mut out = String::new();
    if let Some(signal) = &plan.signal {
        match signal {
            SignalSpec::Named(input) => writeln!(out, "signal {}", input.label()),
            SignalSpec::State(h, v) => writeln!(out, "signal state({h},{v})"),
        }
        .unwrap();
    }
    if let Some(meter) = &plan.meter {
        match meter {
            MeterSpec::DPrime => writeln!(out, "meter dprime"),
            MeterSpec::D(eta) => writeln!(out, "meter d({eta})"),
            MeterSpec::State(h, v) => writeln!(out, "meter state({h},{v})"),
        }
        .unwrap();
    }
    if let Some(eta) = &plan.eta {
        writeln!(out, "eta {eta}").unwrap();
    }
    if let Some(loss) = plan.balanced_loss {
        writeln!(out, "balanced_loss {}", if loss { "on" } else { "off" }).unwrap();
    }
    match &plan.action {
        Action::Run => writeln!(out, "run"),
        Action::Table => writeln!(out, "table"),
        Action::Densmat => writeln!(out, "densmat"),
        Action::Sweep { from, to, steps } => {
            writeln!(out, "sweep alpha {from} .. {to} steps {steps}")
        }
    }
    .unwrap();
    for (format, path) in &plan.outputs {
        writeln!(out, "output {} {}", format.keyword(), path).unwrap();
    }
    out
}

/// Parses a plan, collecting every error instead of stopping at the first.
pub fn parse(source: &str) -> Result<ExperimentPlan, Vec<ParseError>> {
    let mut errors: Vec<ParseError> = Vec::new();
    let mut signal: Option<(SignalSpec, usize)> = None;
    let mut meter: Option<(MeterSpec, usize)> = None;
    let mut eta: Option<(Number, usize)> = None;
    let mut balanced_loss: Option<(bool, usize)> = None;
    let mut action: Option<(Action, usize, usize)> = None;
    let mut outputs: Vec<(OutputFormat, String)> = Vec::new();

    for (idx, raw_line) in source.lines().enumerate() {
        let line_no = idx + 1;
        // strip comments; columns before the '#' stay valid
        let code: String = raw_line.chars().take_while(|&c| c != '#').collect();
        if code.trim().is_empty() {
            continue;
        }
        let mut cursor = Cursor::new(line_no, &code);
        match parse_statement(&mut cursor) {
            Ok(stmt) => {
                let col = stmt.column;
                let dup = |what: &str, line: usize| ParseError {
                    line: line_no,
                    column: col,
                    message: format!("duplicate {what} stanza (first on line {line})"),
                    expected: vec![],
                };
                match stmt.kind {
                    StmtKind::Signal(s) => match &signal {
                        Some((_, first)) => errors.push(dup("signal", *first)),
                        None => signal = Some((s, line_no)),
                    },
                    StmtKind::Meter(m) => match &meter {
                        Some((_, first)) => errors.push(dup("meter", *first)),
                        None => meter = Some((m, line_no)),
                    },
                    StmtKind::Eta(n) => match &eta {
                        Some((_, first)) => errors.push(dup("eta", *first)),
                        None => eta = Some((n, line_no)),
                    },
                    StmtKind::BalancedLoss(b) => match &balanced_loss {
                        Some((_, first)) => errors.push(dup("balanced_loss", *first)),
                        None => balanced_loss = Some((b, line_no)),
                    },
                    StmtKind::Action(a) => match &action {
                        Some((_, first, _)) => errors.push(ParseError {
                            line: line_no,
                            column: col,
                            message: format!(
                                "a plan has exactly one action; one is already on line {first}"
                            ),
                            expected: vec![],
                        }),
                        None => action = Some((a, line_no, col)),
                    },
                    StmtKind::Output(format, path) => outputs.push((format, path)),
                }
            }
            Err(e) => errors.push(e),
        }
    }

    let action = match action {
        Some((action, line, column)) => {
            validate_action(&action, &signal, &balanced_loss, line, column, &mut errors);
            action
        }
        None => {
            errors.push(ParseError {
                line: 1,
                column: 1,
                message: "plan has no action".to_string(),
                expected: vec![
                    "run".into(),
                    "table".into(),
                    "densmat".into(),
                    "sweep".into(),
                ],
            });
            Action::Run
        }
    };

    if let Some((n, line)) = eta {
        let value = n.value();
        if !(0.0..=1.0).contains(&value) {
            errors.push(ParseError {
                line,
                column: 1,
                message: format!("eta = {value} is outside [0, 1]"),
                expected: vec![],
            });
        }
    }

    if !errors.is_empty() {
        return Err(errors);
    }
    Ok(ExperimentPlan {
        signal: signal.map(|(s, _)| s),
        meter: meter.map(|(m, _)| m),
        eta: eta.map(|(n, _)| n),
        balanced_loss: balanced_loss.map(|(b, _)| b),
        action,
        outputs,
    })
}

fn validate_action(
    action: &Action,
    signal: &Option<(SignalSpec, usize)>,
    balanced_loss: &Option<(bool, usize)>,
    line: usize,
    column: usize,
    errors: &mut Vec<ParseError>,
) {
    match action {
        Action::Run => {
            if signal.is_none() {
                errors.push(ParseError {
                    line,
                    column,
                    message: "run requires a signal stanza".to_string(),
                    expected: vec!["signal".into()],
                });
            }
        }
        Action::Sweep { from, to, steps } => {
            if balanced_loss.as_ref().map(|(b, _)| *b) != Some(true) {
                errors.push(ParseError {
                    line,
                    column,
                    message:
                        "sweep runs the circuit weakly and requires balanced_loss on \
                         (the 2/3 loss balances the measurement statistics)"
                            .to_string(),
                    expected: vec!["balanced_loss on".into()],
                });
            }
            if *steps < 2 {
                errors.push(ParseError {
                    line,
                    column,
                    message: format!("sweep needs at least 2 steps, got {steps}"),
                    expected: vec![],
                });
            }
            let (lo, hi) = (from.value(), to.value());
            if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
                errors.push(ParseError {
                    line,
                    column,
                    message: format!("sweep range {lo} .. {hi} must satisfy 0 <= from <= to <= 1"),
                    expected: vec![],
                });
            }
        }
        Action::Table | Action::Densmat => {}
    }
}

struct Stmt {
    kind: StmtKind,
    column: usize,
}

enum StmtKind {
    Signal(SignalSpec),
    Meter(MeterSpec),
    Eta(Number),
    BalancedLoss(bool),
    Action(Action),
    Output(OutputFormat, String),
}

fn parse_statement(cursor: &mut Cursor) -> Result<Stmt, ParseError> {
    cursor.skip_ws();
    let column = cursor.column();
    let keyword = cursor.word().ok_or_else(|| {
        cursor.error(
            "expected a statement keyword",
            STATEMENT_KEYWORDS.iter().map(|s| s.to_string()).collect(),
        )
    })?;
    let kind = match keyword.as_str() {
        "signal" => StmtKind::Signal(parse_signal(cursor)?),
        "meter" => StmtKind::Meter(parse_meter(cursor)?),
        "eta" => {
            cursor.skip_ws();
            StmtKind::Eta(cursor.number()?)
        }
        "balanced_loss" => {
            cursor.skip_ws();
            let col = cursor.column();
            match cursor.word().as_deref() {
                Some("on") => StmtKind::BalancedLoss(true),
                Some("off") => StmtKind::BalancedLoss(false),
                _ => {
                    return Err(cursor.error_at(
                        col,
                        "balanced_loss takes on or off",
                        vec!["on".into(), "off".into()],
                    ))
                }
            }
        }
        "sweep" => StmtKind::Action(parse_sweep(cursor)?),
        "table" => StmtKind::Action(Action::Table),
        "densmat" => StmtKind::Action(Action::Densmat),
        "run" => StmtKind::Action(Action::Run),
        "output" => {
            cursor.skip_ws();
            let col = cursor.column();
            let format = match cursor.word().as_deref() {
                Some("csv") => OutputFormat::Csv,
                Some("json") => OutputFormat::Json,
                _ => {
                    return Err(cursor.error_at(
                        col,
                        "output takes a format then a path",
                        vec!["csv".into(), "json".into()],
                    ))
                }
            };
            let path = cursor.rest_trimmed();
            if path.is_empty() {
                return Err(cursor.error("output is missing a path", vec!["a file path".into()]));
            }
            return Ok(Stmt {
                kind: StmtKind::Output(format, path),
                column,
            });
        }
        other => {
            return Err(cursor.error_at(
                column,
                &format!("unknown keyword `{other}`"),
                STATEMENT_KEYWORDS.iter().map(|s| s.to_string()).collect(),
            ))
        }
    };
    cursor.expect_end()?;
    Ok(Stmt { kind, column })
}

fn parse_signal(cursor: &mut Cursor) -> Result<SignalSpec, ParseError> {
    cursor.skip_ws();
    let col = cursor.column();
    let word = cursor.word().ok_or_else(|| {
        cursor.error_at(col, "signal needs a state", signal_expectations())
    })?;
    if word == "state" {
        let (h, v) = parse_state_args(cursor)?;
        if h.value() == 0.0 && v.value() == 0.0 {
            return Err(cursor.error_at(col, "state amplitudes are both zero", vec![]));
        }
        return Ok(SignalSpec::State(h, v));
    }
    match StandardInput::from_label(&word) {
        Some(input) => Ok(SignalSpec::Named(input)),
        None => Err(cursor.error_at(
            col,
            &format!("`{word}` is not a signal state"),
            signal_expectations(),
        )),
    }
}

fn signal_expectations() -> Vec<String> {
    let mut v: Vec<String> = SIGNAL_NAMES.iter().map(|s| s.to_string()).collect();
    v.push("state(h,v)".to_string());
    v
}

fn parse_meter(cursor: &mut Cursor) -> Result<MeterSpec, ParseError> {
    cursor.skip_ws();
    let col = cursor.column();
    let expected = || vec!["dprime".into(), "d(eta)".into(), "state(h,v)".into()];
    let word = cursor
        .word()
        .ok_or_else(|| cursor.error_at(col, "meter needs a preparation", expected()))?;
    match word.as_str() {
        "dprime" => Ok(MeterSpec::DPrime),
        "d" => {
            cursor.expect_symbol('(')?;
            cursor.skip_ws();
            let eta = cursor.number()?;
            cursor.skip_ws();
            cursor.expect_symbol(')')?;
            if !(0.0..=1.0).contains(&eta.value()) {
                return Err(cursor.error_at(
                    col,
                    &format!("meter reflectivity {} is outside [0, 1]", eta.value()),
                    vec![],
                ));
            }
            Ok(MeterSpec::D(eta))
        }
        "state" => {
            let (h, v) = parse_state_args(cursor)?;
            if h.value() == 0.0 && v.value() == 0.0 {
                return Err(cursor.error_at(col, "state amplitudes are both zero", vec![]));
            }
            Ok(MeterSpec::State(h, v))
        }
        other => Err(cursor.error_at(
            col,
            &format!("`{other}` is not a meter preparation"),
            expected(),
        )),
    }
}

fn parse_state_args(cursor: &mut Cursor) -> Result<(Number, Number), ParseError> {
    cursor.expect_symbol('(')?;
    cursor.skip_ws();
    let h = cursor.number()?;
    cursor.skip_ws();
    cursor.expect_symbol(',')?;
    cursor.skip_ws();
    let v = cursor.number()?;
    cursor.skip_ws();
    cursor.expect_symbol(')')?;
    Ok((h, v))
}

fn parse_sweep(cursor: &mut Cursor) -> Result<Action, ParseError> {
    cursor.skip_ws();
    let col = cursor.column();
    if cursor.word().as_deref() != Some("alpha") {
        return Err(cursor.error_at(col, "sweep varies alpha", vec!["alpha".into()]));
    }
    cursor.skip_ws();
    let from = cursor.number()?;
    cursor.skip_ws();
    cursor.expect_dotdot()?;
    cursor.skip_ws();
    let to = cursor.number()?;
    cursor.skip_ws();
    let col = cursor.column();
    if cursor.word().as_deref() != Some("steps") {
        return Err(cursor.error_at(col, "sweep needs a step count", vec!["steps".into()]));
    }
    cursor.skip_ws();
    let steps = cursor.integer()?;
    Ok(Action::Sweep { from, to, steps })
}

/// Character cursor over one line with 1-based column tracking.
struct Cursor {
    line: usize,
    chars: Vec<char>,
    pos: usize,
}

impl Cursor {
    fn new(line: usize, text: &str) -> Self {
        Self {
            line,
            chars: text.chars().collect(),
            pos: 0,
        }
    }

    fn column(&self) -> usize {
        self.pos + 1
    }

    fn clamped_column(&self, col: usize) -> usize {
        col.min(self.chars.len().max(1))
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, offset: usize) -> Option<char> {
        self.chars.get(self.pos + offset).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn error(&self, message: &str, expected: Vec<String>) -> ParseError {
        self.error_at(self.column(), message, expected)
    }

    fn error_at(&self, column: usize, message: &str, expected: Vec<String>) -> ParseError {
        ParseError {
            line: self.line,
            column: self.clamped_column(column),
            message: message.to_string(),
            expected,
        }
    }

    fn word(&mut self) -> Option<String> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_alphanumeric() || matches!(c, '_' | '+' | '-'))
        {
            self.pos += 1;
        }
        if self.pos == start {
            None
        } else {
            Some(self.chars[start..self.pos].iter().collect())
        }
    }

    fn number(&mut self) -> Result<Number, ParseError> {
        let start = self.pos;
        if self.peek() == Some('-') {
            self.pos += 1;
        }
        let int_start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == int_start {
            return Err(self.error_at(start + 1, "expected a number", vec!["a number".into()]));
        }
        match self.peek() {
            Some('/') => {
                self.pos += 1;
                let den_start = self.pos;
                while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    self.pos += 1;
                }
                if self.pos == den_start {
                    return Err(self.error("fraction is missing a denominator", vec![]));
                }
                let text: String = self.chars[start..self.pos].iter().collect();
                let (num_text, den_text) = text.split_once('/').expect("slash present");
                let num: i64 = num_text.parse().map_err(|_| {
                    self.error_at(start + 1, "numerator does not fit a 64-bit integer", vec![])
                })?;
                let den: i64 = den_text.parse().map_err(|_| {
                    self.error_at(start + 1, "denominator does not fit a 64-bit integer", vec![])
                })?;
                if den == 0 {
                    return Err(self.error_at(start + 1, "division by zero in fraction", vec![]));
                }
                Ok(Number::Rational { num, den })
            }
            // a '.' starts a decimal part unless it begins a `..` token
            Some('.') if self.peek_at(1) != Some('.') => {
                self.pos += 1;
                let frac_start = self.pos;
                while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    self.pos += 1;
                }
                if self.pos == frac_start {
                    return Err(self.error("decimal is missing its fractional digits", vec![]));
                }
                let text: String = self.chars[start..self.pos].iter().collect();
                let value: f64 = text
                    .parse()
                    .map_err(|_| self.error_at(start + 1, "malformed number", vec![]))?;
                Ok(Number::Decimal(value))
            }
            _ => {
                let text: String = self.chars[start..self.pos].iter().collect();
                let value: f64 = text
                    .parse()
                    .map_err(|_| self.error_at(start + 1, "malformed number", vec![]))?;
                Ok(Number::Decimal(value))
            }
        }
    }

    fn integer(&mut self) -> Result<u32, ParseError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.error("expected an integer", vec!["an integer".into()]));
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        text.parse()
            .map_err(|_| self.error_at(start + 1, "integer out of range", vec![]))
    }

    fn expect_symbol(&mut self, symbol: char) -> Result<(), ParseError> {
        if self.peek() == Some(symbol) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(
                &format!("expected `{symbol}`"),
                vec![symbol.to_string()],
            ))
        }
    }

    fn expect_dotdot(&mut self) -> Result<(), ParseError> {
        if self.peek() == Some('.') && self.peek_at(1) == Some('.') {
            self.pos += 2;
            Ok(())
        } else {
            Err(self.error("expected `..`", vec!["..".into()]))
        }
    }

    fn rest_trimmed(&mut self) -> String {
        let rest: String = self.chars[self.pos..].iter().collect();
        self.pos = self.chars.len();
        rest.trim().to_string()
    }

    fn expect_end(&mut self) -> Result<(), ParseError> {
        self.skip_ws();
        if self.pos < self.chars.len() {
            return Err(self.error("unexpected trailing input", vec![]));
        }
        Ok(())
    }
}
