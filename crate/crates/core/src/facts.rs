//! One-shot parsing of a source sample into the immutable structural facts
//! consumed by every agent.
//!
//! Parsing happens exactly once per sample: agents never see raw source,
//! only this bundle. A syntactically invalid input produces a
//! [`ParseFailure`] (never a partial bundle), which the aggregator maps to
//! the `ERROR` verdict.

use std::collections::{BTreeMap, BTreeSet};

use rustpython_parser::{ast, lexer::lex, Mode as ParseMode, Parse, Tok};
use serde::{Deserialize, Serialize};

/// Inputs below this line count are analyzed in patch mode, which relaxes
/// the performance thresholds by the patch multiplier.
pub const PATCH_MODE_MAX_LINES: u32 = 100;

/// Default per-sample size cap. Dataset samples are short; anything near
/// this limit would blow the latency budget.
pub const DEFAULT_SIZE_CAP_BYTES: usize = 1024 * 1024;

/// Analysis mode, derived from the sample's line count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Patch,
    Full,
}

/// A code sample to verify.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceUnit {
    pub id: String,
    pub text: String,
    pub line_count: u32,
    pub mode: Mode,
}

impl SourceUnit {
    /// Build a unit from raw source text; `mode` is `Patch` exactly when
    /// the line count is below [`PATCH_MODE_MAX_LINES`].
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        let line_count = text.lines().count() as u32;
        let mode = if line_count < PATCH_MODE_MAX_LINES {
            Mode::Patch
        } else {
            Mode::Full
        };
        SourceUnit {
            id: id.into(),
            text,
            line_count,
            mode,
        }
    }
}

/// Per-function structural measurements.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FunctionFacts {
    pub name: String,
    pub param_count: u32,
    /// 1 + branch points (if/elif, loop headers, boolean short-circuit
    /// operators, exception handlers, conditional expressions).
    pub cyclomatic_complexity: u32,
    pub max_nesting_depth: u32,
    pub max_loop_depth: u32,
    /// Direct recursion only; mutual recursion is not flagged.
    pub is_recursive: bool,
    pub self_call_count: u32,
    pub has_exception_handling: bool,
    pub has_docstring: bool,
    /// Whether any comparison against an empty/None/zero literal appears in
    /// the body; the correctness agent reads this as edge-case guarding.
    pub has_input_guard: bool,
    /// Subscripts, division/modulo, attribute access on call results, and
    /// IO-like calls.
    pub risky_op_count: u32,
    pub line_span: (u32, u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Import {
    pub module: String,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CallSite {
    /// Source text of the callee expression, e.g. `os.system` or `eval`.
    pub callee: String,
    /// Last dotted component of the callee, e.g. `system`.
    pub base: String,
    /// Source text between the callee and the closing parenthesis.
    pub arguments: String,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StringLiteral {
    pub value: String,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Assignment {
    pub target: String,
    pub value_text: String,
    pub line: u32,
}

/// Anti-pattern sightings inside loop bodies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopBodyOp {
    StringConcat,
    NestedLinearSearch,
}

/// Everything the agents are allowed to know about a sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StructuralFacts {
    pub functions: Vec<FunctionFacts>,
    pub imports: Vec<Import>,
    pub calls: Vec<CallSite>,
    pub string_literals: Vec<StringLiteral>,
    pub assignments: Vec<Assignment>,
    pub loop_body_ops: Vec<(LoopBodyOp, u32)>,
    pub comment_line_count: u32,
    pub total_line_count: u32,
    /// Operator lexeme multiset for Halstead metrics.
    pub operator_tokens: BTreeMap<String, u32>,
    /// Operand lexeme multiset (names, numbers, strings) for Halstead metrics.
    pub operand_tokens: BTreeMap<String, u32>,
    /// Lines whose raw text mentions an authentication keyword
    /// (password/auth/login/token); used for contextual escalation.
    pub auth_keyword_lines: BTreeSet<u32>,
    /// Line of the first top-level statement that is not an import and not
    /// the module docstring, if any.
    pub first_non_import_line: Option<u32>,
    pub mode: Mode,
}

impl StructuralFacts {
    pub fn total_token_count(&self) -> usize {
        (self.operator_tokens.values().sum::<u32>() + self.operand_tokens.values().sum::<u32>())
            as usize
    }

    pub fn distinct_token_count(&self) -> usize {
        self.operator_tokens.len() + self.operand_tokens.len()
    }
}

/// Why a sample could not be analyzed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParseFailure {
    pub message: String,
    pub offending_line: Option<u32>,
}

impl std::fmt::Display for ParseFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.offending_line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

const AUTH_KEYWORDS: [&str; 4] = ["password", "auth", "login", "token"];

const IO_LIKE_CALLEES: [&str; 6] = ["open", "read", "write", "parse", "load", "request"];

/// Extract the shared fact bundle from a sample, with the default size cap.
pub fn extract_facts(unit: &SourceUnit) -> Result<StructuralFacts, ParseFailure> {
    extract_facts_with_cap(unit, DEFAULT_SIZE_CAP_BYTES)
}

/// Extract facts, rejecting inputs larger than `size_cap` bytes.
pub fn extract_facts_with_cap(
    unit: &SourceUnit,
    size_cap: usize,
) -> Result<StructuralFacts, ParseFailure> {
    if unit.text.len() > size_cap {
        return Err(ParseFailure {
            message: format!(
                "input of {} bytes exceeds the {} byte size cap",
                unit.text.len(),
                size_cap
            ),
            offending_line: None,
        });
    }
    let source = unit.text.as_str();
    let lines = LineIndex::new(source);

    let suite = ast::Suite::parse(source, &unit.id).map_err(|e| ParseFailure {
        message: format!("syntax error: {}", e.error),
        offending_line: Some(lines.line_of(e.offset.to_usize())),
    })?;

    // Token pass: Halstead multisets and comment lines. The parser already
    // accepted the input, so lexical errors are unreachable in practice,
    // but they map to parse failures all the same.
    let mut operator_tokens: BTreeMap<String, u32> = BTreeMap::new();
    let mut operand_tokens: BTreeMap<String, u32> = BTreeMap::new();
    let mut comment_lines: BTreeSet<u32> = BTreeSet::new();
    for item in lex(source, ParseMode::Module) {
        let (tok, range) = item.map_err(|e| ParseFailure {
            message: format!("lexical error: {}", e.error),
            offending_line: Some(lines.line_of(e.location.to_usize())),
        })?;
        let lexeme = || source[range.start().to_usize()..range.end().to_usize()].to_string();
        match &tok {
            Tok::Comment(_) => {
                comment_lines.insert(lines.line_of(range.start().to_usize()));
            }
            Tok::Name { .. }
            | Tok::Int { .. }
            | Tok::Float { .. }
            | Tok::Complex { .. }
            | Tok::String { .. }
            | Tok::True
            | Tok::False
            | Tok::None => {
                *operand_tokens.entry(lexeme()).or_insert(0) += 1;
            }
            Tok::Newline
            | Tok::NonLogicalNewline
            | Tok::Indent
            | Tok::Dedent
            | Tok::EndOfFile => {}
            _ => {
                *operator_tokens.entry(lexeme()).or_insert(0) += 1;
            }
        }
    }

    let mut auth_keyword_lines = BTreeSet::new();
    for (idx, raw) in source.lines().enumerate() {
        let lower = raw.to_ascii_lowercase();
        if AUTH_KEYWORDS.iter().any(|kw| lower.contains(kw)) {
            auth_keyword_lines.insert(idx as u32 + 1);
        }
    }

    let mut walker = Walker {
        source,
        lines: &lines,
        functions: Vec::new(),
        imports: Vec::new(),
        calls: Vec::new(),
        string_literals: Vec::new(),
        assignments: Vec::new(),
        loop_body_ops: Vec::new(),
        first_non_import_line: None,
        fn_stack: Vec::new(),
    };
    for (idx, stmt) in suite.iter().enumerate() {
        walker.top_level(stmt, idx == 0);
    }
    walker.functions.sort_by(|a, b| {
        a.line_span
            .0
            .cmp(&b.line_span.0)
            .then_with(|| a.name.cmp(&b.name))
    });

    Ok(StructuralFacts {
        functions: walker.functions,
        imports: walker.imports,
        calls: walker.calls,
        string_literals: walker.string_literals,
        assignments: walker.assignments,
        loop_body_ops: walker.loop_body_ops,
        comment_line_count: comment_lines.len() as u32,
        total_line_count: unit.line_count,
        operator_tokens,
        operand_tokens,
        auth_keyword_lines,
        first_non_import_line: walker.first_non_import_line,
        mode: unit.mode,
    })
}

/// Direct-recursion detection over a call list: a function is recursive iff
/// its own name appears as the base of a call inside its own body.
pub fn detect_recursion(function_name: &str, calls_in_body: &[CallSite]) -> (bool, u32) {
    let count = calls_in_body
        .iter()
        .filter(|c| c.base == function_name)
        .count() as u32;
    (count > 0, count)
}

struct LineIndex {
    // byte offset of the start of each line
    starts: Vec<usize>,
    max_line: u32,
}

impl LineIndex {
    fn new(source: &str) -> Self {
        let mut starts = vec![0usize];
        for (i, b) in source.bytes().enumerate() {
            if b == b'\n' {
                starts.push(i + 1);
            }
        }
        LineIndex {
            starts,
            max_line: source.lines().count().max(1) as u32,
        }
    }

    /// 1-based line containing the byte offset, clamped so offsets pointing
    /// at end-of-input still name a real line.
    fn line_of(&self, offset: usize) -> u32 {
        (self.starts.partition_point(|&s| s <= offset) as u32).min(self.max_line)
    }
}

/// In-progress measurements for one function.
struct FnState {
    name: String,
    param_count: u32,
    start_line: u32,
    end_line: u32,
    branch_points: u32,
    depth: u32,
    max_depth: u32,
    loop_depth: u32,
    max_loop_depth: u32,
    self_call_count: u32,
    has_exception_handling: bool,
    has_docstring: bool,
    has_input_guard: bool,
    risky_op_count: u32,
}

struct Walker<'a> {
    source: &'a str,
    lines: &'a LineIndex,
    functions: Vec<FunctionFacts>,
    imports: Vec<Import>,
    calls: Vec<CallSite>,
    string_literals: Vec<StringLiteral>,
    assignments: Vec<Assignment>,
    loop_body_ops: Vec<(LoopBodyOp, u32)>,
    first_non_import_line: Option<u32>,
    fn_stack: Vec<FnState>,
}

impl<'a> Walker<'a> {
    fn slice(&self, range: ast::text_size::TextRange) -> &'a str {
        &self.source[range.start().to_usize()..range.end().to_usize()]
    }

    fn line(&self, range: ast::text_size::TextRange) -> u32 {
        self.lines.line_of(range.start().to_usize())
    }

    fn top_level(&mut self, stmt: &ast::Stmt, is_first: bool) {
        use ast::Stmt::*;
        let is_import = matches!(stmt, Import(_) | ImportFrom(_));
        let is_module_docstring = is_first && docstring_of(std::slice::from_ref(stmt)).is_some();
        if !is_import && !is_module_docstring && self.first_non_import_line.is_none() {
            let line = self.line(stmt_range(stmt));
            self.first_non_import_line = Some(line);
        }
        self.stmt(stmt);
    }

    fn current(&mut self) -> Option<&mut FnState> {
        self.fn_stack.last_mut()
    }

    fn branch(&mut self, n: u32) {
        if let Some(f) = self.current() {
            f.branch_points += n;
        }
    }

    fn enter_block(&mut self) {
        if let Some(f) = self.current() {
            f.depth += 1;
            f.max_depth = f.max_depth.max(f.depth);
        }
    }

    fn leave_block(&mut self) {
        if let Some(f) = self.current() {
            f.depth -= 1;
        }
    }

    fn block(&mut self, body: &[ast::Stmt]) {
        self.enter_block();
        for s in body {
            self.stmt(s);
        }
        self.leave_block();
    }

    fn in_loop(&mut self) -> bool {
        self.fn_stack.last().map(|f| f.loop_depth > 0).unwrap_or(false)
    }

    fn function_def(
        &mut self,
        name: &str,
        args: &ast::Arguments,
        body: &[ast::Stmt],
        range: ast::text_size::TextRange,
    ) {
        // The def statement itself nests inside the parent block; its body
        // belongs to the new function, starting at depth 0.
        let param_count = (args.posonlyargs.len()
            + args.args.len()
            + args.kwonlyargs.len()
            + args.vararg.iter().count()
            + args.kwarg.iter().count()) as u32;
        let start_line = self.lines.line_of(range.start().to_usize());
        let end_line = self.lines.line_of(range.end().to_usize().saturating_sub(1).max(
            range.start().to_usize(),
        ));
        for a in args.posonlyargs.iter().chain(&args.args).chain(&args.kwonlyargs) {
            if let Some(default) = &a.default {
                self.expr(default);
            }
        }
        self.fn_stack.push(FnState {
            name: name.to_string(),
            param_count,
            start_line,
            end_line,
            branch_points: 0,
            depth: 0,
            max_depth: 0,
            loop_depth: 0,
            max_loop_depth: 0,
            self_call_count: 0,
            has_exception_handling: false,
            has_docstring: docstring_of(body).is_some(),
            has_input_guard: false,
            risky_op_count: 0,
        });
        for s in body {
            self.stmt(s);
        }
        let f = self.fn_stack.pop().expect("pushed above");
        self.functions.push(FunctionFacts {
            name: f.name,
            param_count: f.param_count,
            cyclomatic_complexity: 1 + f.branch_points,
            max_nesting_depth: f.max_depth,
            max_loop_depth: f.max_loop_depth,
            is_recursive: f.self_call_count > 0,
            self_call_count: f.self_call_count,
            has_exception_handling: f.has_exception_handling,
            has_docstring: f.has_docstring,
            has_input_guard: f.has_input_guard,
            risky_op_count: f.risky_op_count,
            line_span: (f.start_line, f.end_line),
        });
    }

    fn stmt(&mut self, stmt: &ast::Stmt) {
        use ast::Stmt;
        match stmt {
            Stmt::FunctionDef(d) => {
                for dec in &d.decorator_list {
                    self.expr(dec);
                }
                self.function_def(d.name.as_str(), &d.args, &d.body, d.range);
            }
            Stmt::AsyncFunctionDef(d) => {
                for dec in &d.decorator_list {
                    self.expr(dec);
                }
                self.function_def(d.name.as_str(), &d.args, &d.body, d.range);
            }
            Stmt::ClassDef(d) => {
                for dec in &d.decorator_list {
                    self.expr(dec);
                }
                for base in &d.bases {
                    self.expr(base);
                }
                self.block(&d.body);
            }
            Stmt::If(s) => {
                self.branch(1);
                self.expr(&s.test);
                self.block(&s.body);
                // An elif chain arrives as orelse = [If]; textually it sits
                // at the same indentation, so it must not deepen nesting.
                match s.orelse.as_slice() {
                    [Stmt::If(_)] => self.stmt(&s.orelse[0]),
                    [] => {}
                    other => {
                        self.enter_block();
                        for st in other {
                            self.stmt(st);
                        }
                        self.leave_block();
                    }
                }
            }
            Stmt::While(s) => {
                self.branch(1);
                self.expr(&s.test);
                self.loop_body(&s.body);
                if !s.orelse.is_empty() {
                    self.block(&s.orelse);
                }
            }
            Stmt::For(s) => {
                self.branch(1);
                self.expr(&s.iter);
                self.loop_body(&s.body);
                if !s.orelse.is_empty() {
                    self.block(&s.orelse);
                }
            }
            Stmt::AsyncFor(s) => {
                self.branch(1);
                self.expr(&s.iter);
                self.loop_body(&s.body);
                if !s.orelse.is_empty() {
                    self.block(&s.orelse);
                }
            }
            Stmt::Try(s) => {
                if let Some(f) = self.current() {
                    f.has_exception_handling = true;
                }
                self.block(&s.body);
                for handler in &s.handlers {
                    let ast::ExceptHandler::ExceptHandler(h) = handler;
                    self.branch(1);
                    if let Some(t) = &h.type_ {
                        self.expr(t);
                    }
                    self.block(&h.body);
                }
                if !s.orelse.is_empty() {
                    self.block(&s.orelse);
                }
                if !s.finalbody.is_empty() {
                    self.block(&s.finalbody);
                }
            }
            Stmt::TryStar(s) => {
                if let Some(f) = self.current() {
                    f.has_exception_handling = true;
                }
                self.block(&s.body);
                for handler in &s.handlers {
                    let ast::ExceptHandler::ExceptHandler(h) = handler;
                    self.branch(1);
                    if let Some(t) = &h.type_ {
                        self.expr(t);
                    }
                    self.block(&h.body);
                }
                if !s.orelse.is_empty() {
                    self.block(&s.orelse);
                }
                if !s.finalbody.is_empty() {
                    self.block(&s.finalbody);
                }
            }
            Stmt::With(s) => {
                for item in &s.items {
                    self.expr(&item.context_expr);
                }
                self.block(&s.body);
            }
            Stmt::AsyncWith(s) => {
                for item in &s.items {
                    self.expr(&item.context_expr);
                }
                self.block(&s.body);
            }
            Stmt::Match(s) => {
                self.expr(&s.subject);
                for case in &s.cases {
                    if let Some(g) = &case.guard {
                        self.expr(g);
                    }
                    self.block(&case.body);
                }
            }
            Stmt::Import(s) => {
                let line = self.line(s.range);
                for alias in &s.names {
                    self.imports.push(Import {
                        module: alias.name.to_string(),
                        line,
                    });
                }
            }
            Stmt::ImportFrom(s) => {
                let dots = ".".repeat(s.level.map(|l| l.to_u32() as usize).unwrap_or(0));
                let module = format!(
                    "{dots}{}",
                    s.module.as_ref().map(|m| m.as_str()).unwrap_or("")
                );
                self.imports.push(Import {
                    module,
                    line: self.line(s.range),
                });
            }
            Stmt::Assign(s) => {
                let line = self.line(s.range);
                let value_text = self.slice(expr_range(&s.value)).to_string();
                for target in &s.targets {
                    self.record_assign_target(target, &value_text, line);
                }
                self.detect_string_concat_assign(s);
                self.expr(&s.value);
            }
            Stmt::AugAssign(s) => {
                let line = self.line(s.range);
                let value_text = self.slice(expr_range(&s.value)).to_string();
                self.record_assign_target(&s.target, &value_text, line);
                if self.in_loop()
                    && matches!(s.op, ast::Operator::Add)
                    && is_stringish(&s.value)
                {
                    self.loop_body_ops.push((LoopBodyOp::StringConcat, line));
                }
                self.expr(&s.value);
            }
            Stmt::AnnAssign(s) => {
                if let Some(value) = &s.value {
                    let line = self.line(s.range);
                    let value_text = self.slice(expr_range(value)).to_string();
                    self.record_assign_target(&s.target, &value_text, line);
                    self.expr(value);
                }
            }
            Stmt::Return(s) => {
                if let Some(v) = &s.value {
                    self.expr(v);
                }
            }
            Stmt::Raise(s) => {
                if let Some(e) = &s.exc {
                    self.expr(e);
                }
                if let Some(c) = &s.cause {
                    self.expr(c);
                }
            }
            Stmt::Assert(s) => {
                self.expr(&s.test);
                if let Some(m) = &s.msg {
                    self.expr(m);
                }
            }
            Stmt::Delete(s) => {
                for t in &s.targets {
                    self.expr(t);
                }
            }
            Stmt::Expr(s) => self.expr(&s.value),
            Stmt::Global(_) | Stmt::Nonlocal(_) | Stmt::Pass(_) | Stmt::Break(_)
            | Stmt::Continue(_) | Stmt::TypeAlias(_) => {}
        }
    }

    fn loop_body(&mut self, body: &[ast::Stmt]) {
        if let Some(f) = self.current() {
            f.loop_depth += 1;
            f.max_loop_depth = f.max_loop_depth.max(f.loop_depth);
        }
        self.block(body);
        if let Some(f) = self.current() {
            f.loop_depth -= 1;
        }
    }

    fn record_assign_target(&mut self, target: &ast::Expr, value_text: &str, line: u32) {
        match target {
            ast::Expr::Name(n) => self.assignments.push(Assignment {
                target: n.id.to_string(),
                value_text: value_text.to_string(),
                line,
            }),
            ast::Expr::Attribute(_) | ast::Expr::Subscript(_) => {
                self.assignments.push(Assignment {
                    target: self.slice(expr_range(target)).to_string(),
                    value_text: value_text.to_string(),
                    line,
                });
                self.expr(target);
            }
            ast::Expr::Tuple(t) => {
                for elt in &t.elts {
                    self.record_assign_target(elt, value_text, line);
                }
            }
            ast::Expr::List(l) => {
                for elt in &l.elts {
                    self.record_assign_target(elt, value_text, line);
                }
            }
            ast::Expr::Starred(s) => self.record_assign_target(&s.value, value_text, line),
            other => self.expr(other),
        }
    }

    /// `x = x + <stringish>` inside a loop.
    fn detect_string_concat_assign(&mut self, s: &ast::StmtAssign) {
        if !self.in_loop() {
            return;
        }
        let [ast::Expr::Name(target)] = s.targets.as_slice() else {
            return;
        };
        let ast::Expr::BinOp(bin) = &*s.value else {
            return;
        };
        if !matches!(bin.op, ast::Operator::Add) {
            return;
        }
        let mentions_target = expr_mentions_name(&s.value, target.id.as_str());
        if mentions_target && (is_stringish(&bin.left) || is_stringish(&bin.right)) {
            let line = self.line(s.range);
            self.loop_body_ops.push((LoopBodyOp::StringConcat, line));
        }
    }

    fn expr(&mut self, expr: &ast::Expr) {
        use ast::Expr;
        match expr {
            Expr::BoolOp(e) => {
                self.branch(e.values.len().saturating_sub(1) as u32);
                for v in &e.values {
                    self.expr(v);
                }
            }
            Expr::NamedExpr(e) => {
                self.expr(&e.target);
                self.expr(&e.value);
            }
            Expr::BinOp(e) => {
                if matches!(
                    e.op,
                    ast::Operator::Div | ast::Operator::FloorDiv | ast::Operator::Mod
                ) {
                    if let Some(f) = self.current() {
                        f.risky_op_count += 1;
                    }
                }
                self.expr(&e.left);
                self.expr(&e.right);
            }
            Expr::UnaryOp(e) => self.expr(&e.operand),
            Expr::Lambda(e) => self.expr(&e.body),
            Expr::IfExp(e) => {
                self.branch(1);
                self.expr(&e.test);
                self.expr(&e.body);
                self.expr(&e.orelse);
            }
            Expr::Dict(e) => {
                for k in e.keys.iter().flatten() {
                    self.expr(k);
                }
                for v in &e.values {
                    self.expr(v);
                }
            }
            Expr::Set(e) => {
                for v in &e.elts {
                    self.expr(v);
                }
            }
            Expr::ListComp(e) => {
                self.comprehensions(&e.generators);
                self.expr(&e.elt);
            }
            Expr::SetComp(e) => {
                self.comprehensions(&e.generators);
                self.expr(&e.elt);
            }
            Expr::DictComp(e) => {
                self.comprehensions(&e.generators);
                self.expr(&e.key);
                self.expr(&e.value);
            }
            Expr::GeneratorExp(e) => {
                self.comprehensions(&e.generators);
                self.expr(&e.elt);
            }
            Expr::Await(e) => self.expr(&e.value),
            Expr::Yield(e) => {
                if let Some(v) = &e.value {
                    self.expr(v);
                }
            }
            Expr::YieldFrom(e) => self.expr(&e.value),
            Expr::Compare(e) => {
                self.check_guard(e);
                self.check_linear_search(e);
                self.expr(&e.left);
                for c in &e.comparators {
                    self.expr(c);
                }
            }
            Expr::Call(e) => {
                self.record_call(e);
                self.expr(&e.func);
                for a in &e.args {
                    self.expr(a);
                }
                for k in &e.keywords {
                    self.expr(&k.value);
                }
            }
            Expr::FormattedValue(e) => self.expr(&e.value),
            Expr::JoinedStr(e) => {
                for v in &e.values {
                    self.expr(v);
                }
            }
            Expr::Constant(e) => {
                if let ast::Constant::Str(s) = &e.value {
                    self.string_literals.push(StringLiteral {
                        value: s.clone(),
                        line: self.line(e.range),
                    });
                }
            }
            Expr::Attribute(e) => {
                if matches!(&*e.value, Expr::Call(_)) {
                    if let Some(f) = self.current() {
                        f.risky_op_count += 1;
                    }
                }
                self.expr(&e.value);
            }
            Expr::Subscript(e) => {
                if let Some(f) = self.current() {
                    f.risky_op_count += 1;
                }
                self.expr(&e.value);
                self.expr(&e.slice);
            }
            Expr::Starred(e) => self.expr(&e.value),
            Expr::Name(_) => {}
            Expr::List(e) => {
                for v in &e.elts {
                    self.expr(v);
                }
            }
            Expr::Tuple(e) => {
                for v in &e.elts {
                    self.expr(v);
                }
            }
            Expr::Slice(e) => {
                if let Some(l) = &e.lower {
                    self.expr(l);
                }
                if let Some(u) = &e.upper {
                    self.expr(u);
                }
                if let Some(s) = &e.step {
                    self.expr(s);
                }
            }
        }
    }

    fn comprehensions(&mut self, generators: &[ast::Comprehension]) {
        for gen in generators {
            // Each generator is a loop header; each filter is a branch.
            self.branch(1 + gen.ifs.len() as u32);
            self.expr(&gen.iter);
            for cond in &gen.ifs {
                self.expr(cond);
            }
        }
    }

    fn record_call(&mut self, call: &ast::ExprCall) {
        let callee_range = expr_range(&call.func);
        let callee: String = self
            .slice(callee_range)
            .chars()
            .filter(|c| !c.is_whitespace())
            .collect();
        let base = match &*call.func {
            ast::Expr::Name(n) => n.id.to_string(),
            ast::Expr::Attribute(a) => a.attr.to_string(),
            _ => callee.rsplit('.').next().unwrap_or(&callee).to_string(),
        };
        let full = self.slice(call.range);
        let args_start = callee_range.end().to_usize() - call.range.start().to_usize();
        let arguments = full[args_start..]
            .trim_start_matches('(')
            .trim_end_matches(')')
            .to_string();
        let line = self.line(call.range);

        if let Some(f) = self.current() {
            if base == f.name {
                f.self_call_count += 1;
            }
            let lower = callee.to_ascii_lowercase();
            if IO_LIKE_CALLEES.iter().any(|io| lower.contains(io)) {
                f.risky_op_count += 1;
            }
        }
        self.calls.push(CallSite {
            callee,
            base,
            arguments,
            line,
        });
    }

    fn check_guard(&mut self, cmp: &ast::ExprCompare) {
        let guard = std::iter::once(&*cmp.left)
            .chain(cmp.comparators.iter())
            .any(is_empty_none_or_zero);
        if guard {
            if let Some(f) = self.current() {
                f.has_input_guard = true;
            }
        }
    }

    /// Membership test against a list-like operand inside a loop body.
    fn check_linear_search(&mut self, cmp: &ast::ExprCompare) {
        if !self.in_loop() {
            return;
        }
        for (op, comparator) in cmp.ops.iter().zip(&cmp.comparators) {
            if !matches!(op, ast::CmpOp::In | ast::CmpOp::NotIn) {
                continue;
            }
            let list_like = match comparator {
                ast::Expr::Name(_) => true,
                ast::Expr::List(l) => !l.elts.is_empty(),
                ast::Expr::ListComp(_) => true,
                _ => false,
            };
            if list_like {
                let line = self.line(cmp.range);
                self.loop_body_ops
                    .push((LoopBodyOp::NestedLinearSearch, line));
            }
        }
    }
}

fn docstring_of(body: &[ast::Stmt]) -> Option<&str> {
    match body.first() {
        Some(ast::Stmt::Expr(e)) => match &*e.value {
            ast::Expr::Constant(c) => match &c.value {
                ast::Constant::Str(s) => Some(s.as_str()),
                _ => None,
            },
            _ => None,
        },
        _ => None,
    }
}

fn is_empty_none_or_zero(expr: &ast::Expr) -> bool {
    match expr {
        ast::Expr::Constant(c) => match &c.value {
            ast::Constant::None => true,
            ast::Constant::Int(i) => i == &ast::bigint::BigInt::from(0),
            ast::Constant::Float(f) => *f == 0.0,
            ast::Constant::Str(s) => s.is_empty(),
            _ => false,
        },
        ast::Expr::List(l) => l.elts.is_empty(),
        ast::Expr::Tuple(t) => t.elts.is_empty(),
        ast::Expr::Dict(d) => d.keys.is_empty(),
        _ => false,
    }
}

fn is_stringish(expr: &ast::Expr) -> bool {
    match expr {
        ast::Expr::Constant(c) => matches!(c.value, ast::Constant::Str(_)),
        ast::Expr::JoinedStr(_) => true,
        ast::Expr::Call(c) => matches!(&*c.func, ast::Expr::Name(n) if n.id.as_str() == "str"),
        ast::Expr::BinOp(b) if matches!(b.op, ast::Operator::Add) => {
            is_stringish(&b.left) || is_stringish(&b.right)
        }
        _ => false,
    }
}

fn expr_mentions_name(expr: &ast::Expr, name: &str) -> bool {
    match expr {
        ast::Expr::Name(n) => n.id.as_str() == name,
        ast::Expr::BinOp(b) => {
            expr_mentions_name(&b.left, name) || expr_mentions_name(&b.right, name)
        }
        _ => false,
    }
}

fn stmt_range(stmt: &ast::Stmt) -> ast::text_size::TextRange {
    use rustpython_parser::ast::Ranged;
    stmt.range()
}

fn expr_range(expr: &ast::Expr) -> ast::text_size::TextRange {
    use rustpython_parser::ast::Ranged;
    expr.range()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn facts(src: &str) -> StructuralFacts {
        extract_facts(&SourceUnit::new("test", src)).expect("fixture parses")
    }

    #[test]
    fn minimal_function() {
        let f = facts("def f():\n    return 1\n");
        assert_eq!(f.functions.len(), 1);
        let func = &f.functions[0];
        assert_eq!(func.name, "f");
        assert_eq!(func.cyclomatic_complexity, 1);
        assert_eq!(func.max_nesting_depth, 0);
        assert!(!func.has_docstring);
    }

    #[test]
    fn syntax_error_is_parse_failure() {
        let err = extract_facts(&SourceUnit::new("bad", "def f(:\n")).unwrap_err();
        assert!(!err.message.is_empty());
        assert_eq!(err.offending_line, Some(1));
    }

    #[test]
    fn size_cap_is_parse_failure() {
        let unit = SourceUnit::new("big", "x = 1\n".repeat(10));
        let err = extract_facts_with_cap(&unit, 16).unwrap_err();
        assert!(err.message.contains("size cap"));
    }

    #[test]
    fn triple_nested_loop_depth() {
        // Hand count: three nested for loops.
        let src = "def f(xs):\n    for a in xs:\n        for b in xs:\n            for c in xs:\n                print(a, b, c)\n";
        let f = facts(src);
        assert_eq!(f.functions[0].max_loop_depth, 3);
        assert_eq!(f.functions[0].max_nesting_depth, 3);
    }

    #[test]
    fn cyclomatic_counts_branch_points() {
        // Hand count: 2 ifs + 1 loop = 3 branch points -> 4.
        let src = "def f(a, b):\n    if a:\n        pass\n    if b:\n        pass\n    for i in a:\n        pass\n";
        assert_eq!(facts(src).functions[0].cyclomatic_complexity, 4);

        // 15 independent ifs -> 16.
        let mut body = String::from("def g(x):\n");
        for i in 0..15 {
            body.push_str(&format!("    if x > {i}:\n        pass\n"));
        }
        assert_eq!(facts(&body).functions[0].cyclomatic_complexity, 16);
    }

    #[test]
    fn cyclomatic_counts_short_circuit_and_handlers() {
        let src = "def f(a, b, c):\n    if a and b or c:\n        pass\n    try:\n        pass\n    except ValueError:\n        pass\n    except KeyError:\n        pass\n    return 1 if a else 2\n";
        // if(1) + and/or(2) + handlers(2) + ternary(1) = 6 -> 7
        assert_eq!(facts(src).functions[0].cyclomatic_complexity, 7);
    }

    #[test]
    fn recursion_is_direct_only() {
        let src = "def fib(n):\n    if n < 2:\n        return n\n    return fib(n - 1) + fib(n - 2)\n\ndef helper(x):\n    return x + 1\n\ndef f(x):\n    return g(x)\n\ndef g(x):\n    return f(x)\n";
        let f = facts(src);
        let by_name = |n: &str| f.functions.iter().find(|x| x.name == n).unwrap();
        assert!(by_name("fib").is_recursive);
        assert_eq!(by_name("fib").self_call_count, 2);
        assert!(!by_name("helper").is_recursive);
        assert_eq!(by_name("helper").self_call_count, 0);
        // Mutual recursion is out of scope for direct detection.
        assert!(!by_name("f").is_recursive);
        assert!(!by_name("g").is_recursive);
    }

    #[test]
    fn mode_boundaries_at_one_hundred_lines() {
        let line = "x = 1\n";
        for (n, mode) in [(99u32, Mode::Patch), (100, Mode::Full), (101, Mode::Full)] {
            let unit = SourceUnit::new("m", line.repeat(n as usize));
            assert_eq!(unit.line_count, n);
            assert_eq!(unit.mode, mode, "{n} lines");
        }
    }

    #[test]
    fn docstring_detection() {
        let f = facts("def f():\n    \"\"\"Doc.\"\"\"\n    return 1\n");
        assert!(f.functions[0].has_docstring);
    }

    #[test]
    fn risky_ops_and_exception_handling() {
        let src = "def f(d, k):\n    try:\n        return d[k] / 2\n    except KeyError:\n        return None\n\ndef g(path):\n    return open(path)\n";
        let f = facts(src);
        let fun = &f.functions[0];
        assert!(fun.has_exception_handling);
        // subscript + division
        assert_eq!(fun.risky_op_count, 2);
        let g = &f.functions[1];
        assert!(!g.has_exception_handling);
        assert_eq!(g.risky_op_count, 1); // open() is IO-like
    }

    #[test]
    fn guard_detection() {
        let yes = facts("def f(xs):\n    if xs == []:\n        return 0\n    return xs[0]\n");
        assert!(yes.functions[0].has_input_guard);
        let none = facts("def f(x):\n    if x is None:\n        return 0\n    return x\n");
        assert!(none.functions[0].has_input_guard);
        let no = facts("def f(x):\n    return x + 1\n");
        assert!(!no.functions[0].has_input_guard);
    }

    #[test]
    fn calls_capture_callee_and_arguments() {
        let f = facts("import os\n\nos.system(\"ls \" + user)\n");
        let call = &f.calls[0];
        assert_eq!(call.callee, "os.system");
        assert_eq!(call.base, "system");
        assert!(call.arguments.contains("user"));
        assert_eq!(call.line, 3);
    }

    #[test]
    fn assignments_and_literals_carry_lines() {
        let f = facts("password = \"hunter2\"\n");
        assert_eq!(f.assignments.len(), 1);
        assert_eq!(f.assignments[0].target, "password");
        assert_eq!(f.assignments[0].value_text, "\"hunter2\"");
        assert_eq!(f.string_literals[0].value, "hunter2");
        assert!(f.auth_keyword_lines.contains(&1));
    }

    #[test]
    fn loop_body_anti_patterns() {
        let src = "def f(items, ys):\n    s = \"\"\n    for it in items:\n        s += str(it)\n        if it in ys:\n            pass\n    return s\n";
        let f = facts(src);
        let kinds: Vec<_> = f.loop_body_ops.iter().map(|(k, _)| *k).collect();
        assert!(kinds.contains(&LoopBodyOp::StringConcat));
        assert!(kinds.contains(&LoopBodyOp::NestedLinearSearch));
    }

    #[test]
    fn comment_lines_and_halstead_tokens() {
        let f = facts("# header\nx = 1  # trailing\ny = 2\n");
        assert_eq!(f.comment_line_count, 2);
        assert_eq!(f.total_line_count, 3);
        // operands: x, 1, y, 2 ; operators: =, =
        assert_eq!(f.operand_tokens.values().sum::<u32>(), 4);
        assert_eq!(f.operator_tokens.get("="), Some(&2));
    }

    #[test]
    fn elif_chain_does_not_deepen_nesting() {
        let src = "def f(x):\n    if x == 1:\n        pass\n    elif x == 2:\n        pass\n    elif x == 3:\n        pass\n    else:\n        pass\n";
        let f = facts(src);
        assert_eq!(f.functions[0].max_nesting_depth, 1);
        assert_eq!(f.functions[0].cyclomatic_complexity, 4); // 3 ifs
    }

    #[test]
    fn imports_grouped_at_top_detection() {
        let grouped = facts("import os\nimport sys\n\nx = 1\n");
        assert_eq!(grouped.first_non_import_line, Some(4));
        assert!(grouped.imports.iter().all(|i| i.line < 4));

        let scattered = facts("import os\nx = 1\nimport sys\n");
        assert_eq!(scattered.first_non_import_line, Some(2));
        assert!(scattered.imports.iter().any(|i| i.line > 2));
    }

    #[test]
    fn determinism_and_line_span_containment() {
        let src = "import os\n\ndef f(a):\n    \"\"\"doc\"\"\"\n    if a > 0:\n        return a\n    return open(\"x\")\n";
        let a = facts(src);
        let b = facts(src);
        assert_eq!(a, b);
        for func in &a.functions {
            assert!(func.line_span.0 >= 1 && func.line_span.1 <= a.total_line_count);
            assert!(func.line_span.0 <= func.line_span.1);
            assert!(func.max_loop_depth <= func.max_nesting_depth);
        }
        for c in &a.calls {
            assert!(c.line >= 1 && c.line <= a.total_line_count);
        }
    }

    #[test]
    fn empty_module_yields_empty_facts() {
        let f = facts("");
        assert!(f.functions.is_empty());
        assert_eq!(f.total_line_count, 0);
    }
}
