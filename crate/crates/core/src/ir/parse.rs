use std::collections::HashSet;

use super::{
    validate, AllocSiteId, FieldDecl, FieldId, FuncId, FunctionDef, IrError, Literal, Param,
    PrimType, Program, Stmt, Ty, TypeDef, TypeId,
};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Char(char),
    Sym(&'static str),
    Site(String),
    Comment(String),
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const KEYWORDS: &[&str] = &[
    "library", "type", "field", "ctor", "fn", "entry", "return", "new", "null", "true", "false",
    "int", "bool", "char",
];

fn lex(src: &str) -> Result<Vec<Token>, IrError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, col, msg: String| IrError::Parse { line, col, msg };
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let bump = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            bump(1, &mut i, &mut col);
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            let start = i + 2;
            let mut j = start;
            while j < chars.len() && chars[j] != '\n' {
                j += 1;
            }
            let text: String = chars[start..j].iter().collect();
            out.push(Token { tok: Tok::Comment(text.trim().to_string()), line: tl, col: tc });
            col += j - i;
            i = j;
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut j = i;
            while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                j += 1;
            }
            let s: String = chars[i..j].iter().collect();
            out.push(Token { tok: Tok::Ident(s), line: tl, col: tc });
            col += j - i;
            i = j;
            continue;
        }
        if c.is_ascii_digit() || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let mut j = i + 1;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            let s: String = chars[i..j].iter().collect();
            let v = s.parse::<i64>().map_err(|e| err(tl, tc, format!("bad integer {s}: {e}")))?;
            out.push(Token { tok: Tok::Int(v), line: tl, col: tc });
            col += j - i;
            i = j;
            continue;
        }
        if c == '\'' {
            match (chars.get(i + 1), chars.get(i + 2)) {
                (Some(&ch), Some('\'')) if ch != '\'' && ch != '\n' => {
                    out.push(Token { tok: Tok::Char(ch), line: tl, col: tc });
                    bump(3, &mut i, &mut col);
                    continue;
                }
                _ => return Err(err(tl, tc, "malformed character literal".into())),
            }
        }
        if c == '@' {
            let mut j = i + 1;
            while j < chars.len()
                && (chars[j].is_ascii_alphanumeric() || matches!(chars[j], '_' | '.' | '~' | '$'))
            {
                j += 1;
            }
            if j == i + 1 {
                return Err(err(tl, tc, "expected an allocation site name after '@'".into()));
            }
            let s: String = chars[i + 1..j].iter().collect();
            out.push(Token { tok: Tok::Site(s), line: tl, col: tc });
            col += j - i;
            i = j;
            continue;
        }
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let sym = match two.as_str() {
            "==" => Some("=="),
            "->" => Some("->"),
            _ => None,
        };
        if let Some(s) = sym {
            out.push(Token { tok: Tok::Sym(s), line: tl, col: tc });
            bump(2, &mut i, &mut col);
            continue;
        }
        let sym = match c {
            '{' => "{",
            '}' => "}",
            '(' => "(",
            ')' => ")",
            ';' => ";",
            ',' => ",",
            '=' => "=",
            '.' => ".",
            ':' => ":",
            _ => return Err(err(tl, tc, format!("unexpected character '{c}'"))),
        };
        out.push(Token { tok: Tok::Sym(sym), line: tl, col: tc });
        bump(1, &mut i, &mut col);
    }
    Ok(out)
}

/// Where an allocation site came from: written out, or to be named.
#[derive(Clone)]
enum PendingSite {
    Explicit(String),
    Auto,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    eof_line: usize,
    types: Vec<TypeDef>,
    functions: Vec<(FunctionDef, Vec<PendingSite>)>,
    entry: Option<FuncId>,
}

impl Parser {
    fn skip_comments(&mut self) {
        while let Some(Token { tok: Tok::Comment(_), .. }) = self.toks.get(self.pos) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<&Tok> {
        self.skip_comments();
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek_at(&mut self, k: usize) -> Option<&Tok> {
        self.skip_comments();
        let mut seen = 0;
        let mut j = self.pos;
        while j < self.toks.len() {
            if !matches!(self.toks[j].tok, Tok::Comment(_)) {
                if seen == k {
                    return Some(&self.toks[j].tok);
                }
                seen += 1;
            }
            j += 1;
        }
        None
    }

    fn here(&mut self) -> (usize, usize) {
        self.skip_comments();
        match self.toks.get(self.pos) {
            Some(t) => (t.line, t.col),
            None => (self.eof_line, 1),
        }
    }

    fn error<T>(&mut self, msg: impl Into<String>) -> Result<T, IrError> {
        let (line, col) = self.here();
        Err(IrError::Parse { line, col, msg: msg.into() })
    }

    fn expect_sym(&mut self, s: &'static str) -> Result<(), IrError> {
        match self.peek() {
            Some(Tok::Sym(x)) if *x == s => {
                self.pos += 1;
                Ok(())
            }
            other => {
                let found = describe(other);
                self.error(format!("expected '{s}', found {found}"))
            }
        }
    }

    fn eat_sym(&mut self, s: &'static str) -> bool {
        if matches!(self.peek(), Some(Tok::Sym(x)) if *x == s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Ident(x)) if x == kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<String, IrError> {
        match self.peek().cloned() {
            Some(Tok::Ident(s)) if !KEYWORDS.contains(&s.as_str()) => {
                self.pos += 1;
                Ok(s)
            }
            other => {
                let found = describe(other.as_ref());
                self.error(format!("expected an identifier, found {found}"))
            }
        }
    }

    fn ty(&mut self) -> Result<Ty, IrError> {
        match self.peek().cloned() {
            Some(Tok::Ident(s)) => {
                self.pos += 1;
                Ok(match s.as_str() {
                    "int" => Ty::Prim(PrimType::Int),
                    "bool" => Ty::Prim(PrimType::Bool),
                    "char" => Ty::Prim(PrimType::Char),
                    _ if KEYWORDS.contains(&s.as_str()) => {
                        self.pos -= 1;
                        return self.error(format!("expected a type, found keyword '{s}'"));
                    }
                    _ => Ty::Ref(TypeId(s)),
                })
            }
            other => {
                let found = describe(other.as_ref());
                self.error(format!("expected a type, found {found}"))
            }
        }
    }

    fn program(&mut self) -> Result<(), IrError> {
        while self.peek().is_some() {
            if self.eat_kw("library") {
                self.library()?;
            } else if self.eat_kw("type") {
                let id = TypeId(self.ident()?);
                let mut fields = Vec::new();
                if !self.eat_sym(";") {
                    self.expect_sym("{")?;
                    while !self.eat_sym("}") {
                        if !self.eat_kw("field") {
                            return self.error("expected 'field' or '}' in type declaration");
                        }
                        fields.push(self.field()?);
                    }
                }
                self.add_type(TypeDef { id, fields, ctors: vec![], library: false })?;
            } else if self.eat_kw("fn") {
                let f = self.function(None, false)?;
                self.functions.push(f);
            } else if self.eat_kw("entry") {
                let name = self.ident()?;
                self.expect_sym(";")?;
                if self.entry.is_some() {
                    return self.error("entry declared twice");
                }
                self.entry = Some(FuncId(name));
            } else {
                let found = describe(self.peek());
                return self.error(format!(
                    "expected 'library', 'type', 'fn' or 'entry', found {found}"
                ));
            }
        }
        Ok(())
    }

    fn add_type(&mut self, t: TypeDef) -> Result<(), IrError> {
        if t.id.as_str() == super::OBJECT || self.types.iter().any(|x| x.id == t.id) {
            return self.error(format!("type {} declared twice", t.id));
        }
        self.types.push(t);
        Ok(())
    }

    fn field(&mut self) -> Result<FieldDecl, IrError> {
        let id = FieldId(self.ident()?);
        let semi_line = self.here().0;
        self.expect_sym(";")?;
        let ghost = matches!(
            self.toks.get(self.pos),
            Some(Token { tok: Tok::Comment(c), line, .. }) if *line == semi_line && c == "ghost"
        );
        Ok(FieldDecl { id, ghost })
    }

    fn library(&mut self) -> Result<(), IrError> {
        let name = self.ident()?;
        self.expect_sym("{")?;
        let mut fields = Vec::new();
        let mut ctors = Vec::new();
        let mut fns = Vec::new();
        while !self.eat_sym("}") {
            if self.eat_kw("field") {
                fields.push(self.field()?);
            } else if self.eat_kw("ctor") {
                let f = self.function(Some(&name), true)?;
                ctors.push(f.0.id.clone());
                fns.push(f);
            } else if self.eat_kw("fn") {
                fns.push(self.function(Some(&name), false)?);
            } else {
                if self.peek().is_none() {
                    return self.error(format!("unterminated library {name}"));
                }
                let found = describe(self.peek());
                return self.error(format!("expected 'field', 'ctor', 'fn' or '}}', found {found}"));
            }
        }
        self.add_type(TypeDef { id: TypeId(name), fields, ctors, library: true })?;
        self.functions.extend(fns);
        Ok(())
    }

    fn function(
        &mut self,
        owner: Option<&str>,
        is_ctor: bool,
    ) -> Result<(FunctionDef, Vec<PendingSite>), IrError> {
        let short = self.ident()?;
        let id = match owner {
            Some(o) => FuncId(format!("{o}.{short}")),
            None => FuncId(short),
        };
        self.expect_sym("(")?;
        let mut params = Vec::new();
        if !self.eat_sym(")") {
            loop {
                let name = self.ident()?;
                let ty = if self.eat_sym(":") {
                    self.ty()?
                } else if name == "this" && owner.is_some() {
                    Ty::Ref(TypeId(owner.unwrap().to_string()))
                } else {
                    Ty::object()
                };
                params.push(Param { name, ty });
                if self.eat_sym(")") {
                    break;
                }
                self.expect_sym(",")?;
            }
        }
        if is_ctor && params.first().map(|p| p.name.as_str()) != Some("this") {
            return self.error(format!("constructor {id} must take 'this' as its first parameter"));
        }
        let ret = if self.eat_sym("->") {
            if is_ctor {
                return self.error(format!("constructor {id} cannot declare a return value"));
            }
            let name = self.ident()?;
            let ty = if self.eat_sym(":") { self.ty()? } else { Ty::object() };
            Some(Param { name, ty })
        } else {
            None
        };
        self.expect_sym("{")?;
        let mut body = Vec::new();
        let mut sites = Vec::new();
        while !self.eat_sym("}") {
            if self.peek().is_none() {
                return self.error(format!("unterminated body of {id}"));
            }
            body.push(self.stmt(&mut sites)?);
        }
        if let Some(r) = &ret {
            if !matches!(body.last(), Some(Stmt::Return { .. })) {
                body.push(Stmt::Return { src: r.name.clone() });
            }
        }
        let f = FunctionDef { id, params, ret, body, is_library: owner.is_some(), is_ctor };
        Ok((f, sites))
    }

    fn args(&mut self) -> Result<Vec<String>, IrError> {
        self.expect_sym("(")?;
        let mut args = Vec::new();
        if self.eat_sym(")") {
            return Ok(args);
        }
        loop {
            args.push(self.ident()?);
            if self.eat_sym(")") {
                return Ok(args);
            }
            self.expect_sym(",")?;
        }
    }

    fn stmt(&mut self, sites: &mut Vec<PendingSite>) -> Result<Stmt, IrError> {
        if self.eat_kw("return") {
            let lhs = self.ident()?;
            let s = if self.eat_sym("==") {
                let rhs = self.ident()?;
                Stmt::ReturnSame { lhs, rhs }
            } else {
                Stmt::Return { src: lhs }
            };
            self.expect_sym(";")?;
            return Ok(s);
        }
        let first = self.ident()?;
        let s = match self.peek().cloned() {
            Some(Tok::Sym("=")) => {
                self.pos += 1;
                self.rhs(first, sites)?
            }
            Some(Tok::Sym(".")) => {
                self.pos += 1;
                let second = self.ident()?;
                if matches!(self.peek(), Some(Tok::Sym("("))) {
                    let args = self.args()?;
                    Stmt::Call { dst: None, func: FuncId(format!("{first}.{second}")), args }
                } else {
                    self.expect_sym("=")?;
                    let src = self.ident()?;
                    Stmt::Store { base: first, field: FieldId(second), src }
                }
            }
            Some(Tok::Sym("(")) => {
                let args = self.args()?;
                Stmt::Call { dst: None, func: FuncId(first), args }
            }
            other => {
                let found = describe(other.as_ref());
                return self.error(format!("expected '=', '.' or '(' after '{first}', found {found}"));
            }
        };
        self.expect_sym(";")?;
        Ok(s)
    }

    fn rhs(&mut self, dst: String, sites: &mut Vec<PendingSite>) -> Result<Stmt, IrError> {
        match self.peek().cloned() {
            Some(Tok::Ident(k)) if k == "new" => {
                self.pos += 1;
                let ty = TypeId(self.ident()?);
                let site = match self.peek().cloned() {
                    Some(Tok::Site(s)) => {
                        self.pos += 1;
                        PendingSite::Explicit(s)
                    }
                    _ => PendingSite::Auto,
                };
                sites.push(site);
                Ok(Stmt::Alloc { dst, ty, site: AllocSiteId(String::new()) })
            }
            Some(Tok::Ident(k)) if k == "null" => {
                self.pos += 1;
                Ok(Stmt::PrimInit { dst, lit: Literal::Null })
            }
            Some(Tok::Ident(k)) if k == "true" || k == "false" => {
                self.pos += 1;
                Ok(Stmt::PrimInit { dst, lit: Literal::Bool(k == "true") })
            }
            Some(Tok::Int(v)) => {
                self.pos += 1;
                Ok(Stmt::PrimInit { dst, lit: Literal::Int(v) })
            }
            Some(Tok::Char(c)) => {
                self.pos += 1;
                Ok(Stmt::PrimInit { dst, lit: Literal::Char(c) })
            }
            Some(Tok::Ident(_)) => {
                let a = self.ident()?;
                if self.eat_sym(".") {
                    let b = self.ident()?;
                    if matches!(self.peek(), Some(Tok::Sym("("))) {
                        let args = self.args()?;
                        Ok(Stmt::Call { dst: Some(dst), func: FuncId(format!("{a}.{b}")), args })
                    } else {
                        Ok(Stmt::Load { dst, base: a, field: FieldId(b) })
                    }
                } else if matches!(self.peek_at(0), Some(Tok::Sym("("))) {
                    let args = self.args()?;
                    Ok(Stmt::Call { dst: Some(dst), func: FuncId(a), args })
                } else {
                    Ok(Stmt::Assign { dst, src: a })
                }
            }
            other => {
                let found = describe(other.as_ref());
                self.error(format!("expected an expression, found {found}"))
            }
        }
    }
}

fn describe(t: Option<&Tok>) -> String {
    match t {
        None => "end of input".into(),
        Some(Tok::Ident(s)) => format!("'{s}'"),
        Some(Tok::Int(i)) => format!("'{i}'"),
        Some(Tok::Char(c)) => format!("'{c}'"),
        Some(Tok::Sym(s)) => format!("'{s}'"),
        Some(Tok::Site(s)) => format!("'@{s}'"),
        Some(Tok::Comment(_)) => "a comment".into(),
    }
}

/// Base name the parser gives an unlabelled allocation.
pub(crate) fn auto_site_base(func: &FunctionDef, dst: &str) -> String {
    if func.is_library {
        format!("o_{}", func.id)
    } else {
        format!("o_{dst}")
    }
}

/// Parses and validates IR text.
pub fn parse_program(src: &str) -> Result<Program, IrError> {
    let toks = lex(src)?;
    let eof_line = src.lines().count().max(1);
    let mut p = Parser { toks, pos: 0, eof_line, types: vec![], functions: vec![], entry: None };
    p.program()?;

    let mut funcs: Vec<(FunctionDef, Vec<PendingSite>)> = std::mem::take(&mut p.functions);
    let rank = |f: &FunctionDef| -> usize {
        match f.id.owner() {
            Some(o) if f.is_library => {
                p.types.iter().position(|t| t.id.as_str() == o).unwrap_or(p.types.len())
            }
            _ => p.types.len() + 1,
        }
    };
    funcs.sort_by_key(|(f, _)| rank(f));

    let mut used: HashSet<String> = HashSet::new();
    for (_, sites) in &funcs {
        for s in sites {
            if let PendingSite::Explicit(name) = s {
                if !used.insert(name.clone()) {
                    return Err(IrError::Validation(format!("allocation site {name} declared twice")));
                }
            }
        }
    }
    let mut functions = Vec::with_capacity(funcs.len());
    for (mut f, sites) in funcs {
        let mut k = 0;
        let snapshot = f.clone();
        for stmt in f.body.iter_mut() {
            if let Stmt::Alloc { dst, site, .. } = stmt {
                *site = AllocSiteId(match &sites[k] {
                    PendingSite::Explicit(s) => s.clone(),
                    PendingSite::Auto => {
                        let base = auto_site_base(&snapshot, dst);
                        let mut cand = base.clone();
                        let mut n = 2;
                        while used.contains(&cand) {
                            cand = format!("{base}_{n}");
                            n += 1;
                        }
                        used.insert(cand.clone());
                        cand
                    }
                });
                k += 1;
            }
        }
        functions.push(f);
    }
    let prog = Program { types: p.types, functions, entry: p.entry };
    validate(&prog)?;
    Ok(prog)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_is_rejected() {
        let e = parse_program("").unwrap_err();
        assert!(matches!(e, IrError::Validation(ref m) if m.contains("no functions")), "{e}");
    }

    #[test]
    fn missing_semicolon_reports_position() {
        let e = parse_program("fn f() {\n  x = y\n}").unwrap_err();
        match e {
            IrError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn auto_sites_are_deduplicated() {
        let p = parse_program("fn f() {\n  x = new Object;\n  x = new Object;\n}").unwrap();
        let sites: Vec<_> = p.sites().into_iter().map(|s| s.0.clone()).collect();
        assert_eq!(sites, vec!["o_x", "o_x_2"]);
    }

    #[test]
    fn explicit_site_wins_over_auto_name() {
        let p = parse_program("fn f() {\n  y = new Object;\n  z = new Object @o_y;\n}").unwrap();
        let sites: Vec<_> = p.sites().into_iter().map(|s| s.0.clone()).collect();
        assert_eq!(sites, vec!["o_y_2", "o_y"]);
    }

    #[test]
    fn ghost_comment_marks_field() {
        let p = parse_program("library B {\n  field f; // ghost\n  field g;\n  fn m(this) { }\n}")
            .unwrap();
        let t = &p.types[0];
        assert!(t.fields[0].ghost);
        assert!(!t.fields[1].ghost);
    }

    #[test]
    fn implicit_return_appended() {
        let p = parse_program("library B {\n  field f;\n  fn get(this) -> r {\n    r = this.f;\n  }\n}")
            .unwrap();
        let f = &p.functions[0];
        assert_eq!(f.body.last(), Some(&Stmt::Return { src: "r".into() }));
    }
}
