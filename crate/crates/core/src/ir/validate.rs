use std::collections::HashSet;

use super::{FunctionDef, IrError, Program, Stmt, Ty};

fn fail<T>(msg: String) -> Result<T, IrError> {
    Err(IrError::Validation(msg))
}

fn check_function(p: &Program, f: &FunctionDef) -> Result<(), IrError> {
    let mut names = HashSet::new();
    for prm in f.params.iter().chain(f.ret.iter()) {
        if !names.insert(prm.name.as_str()) {
            return fail(format!("{}: variable '{}' declared twice in signature", f.id, prm.name));
        }
        if let Ty::Ref(t) = &prm.ty {
            if !p.has_type(t) {
                return fail(format!("{}: unknown type {t}", f.id));
            }
        }
    }
    // Locals are declared by being written somewhere in the body; the
    // language is flow-insensitive, so order does not matter.
    let mut declared: HashSet<&str> = names;
    for s in &f.body {
        if let Some(d) = s.defined() {
            declared.insert(d);
        }
    }
    for (i, s) in f.body.iter().enumerate() {
        for u in s.used() {
            if !declared.contains(u) {
                return fail(format!("{}: statement {} uses undeclared variable '{u}'", f.id, i + 1));
            }
        }
        match s {
            Stmt::Alloc { ty, .. } if !p.has_type(ty) => {
                return fail(format!("{}: allocation of unknown type {ty}", f.id));
            }
            Stmt::Store { field, .. } | Stmt::Load { field, .. } if !p.has_field(field) => {
                return fail(format!("{}: field {field} is not declared by any type", f.id));
            }
            Stmt::Call { func, args, .. } => {
                let Some(callee) = p.function(func) else {
                    return fail(format!("{}: call to undefined function {func}", f.id));
                };
                if callee.params.len() != args.len() {
                    return fail(format!(
                        "{}: {func} expects {} arguments, got {}",
                        f.id,
                        callee.params.len(),
                        args.len()
                    ));
                }
            }
            Stmt::Return { src } => {
                if f.ret.is_none() {
                    return fail(format!("{}: returns {src} but declares no return value", f.id));
                }
            }
            Stmt::ReturnSame { .. } if f.is_library => {
                return fail(format!("{}: library code cannot compare references", f.id));
            }
            _ => {}
        }
    }
    Ok(())
}

/// Checks well-formedness: unique names, resolvable calls, declared fields
/// and types, defined variables and a resolvable entry point.
pub fn validate(p: &Program) -> Result<(), IrError> {
    if p.functions.is_empty() {
        return fail("no functions declared".into());
    }
    let mut seen = HashSet::new();
    for f in &p.functions {
        if !seen.insert(&f.id) {
            return fail(format!("function {} declared twice", f.id));
        }
    }
    for t in &p.types {
        let mut fs = HashSet::new();
        for fd in &t.fields {
            if !fs.insert(&fd.id) {
                return fail(format!("type {}: field {} declared twice", t.id, fd.id));
            }
            if fd.id.as_str().starts_with("__") && !fd.ghost {
                return fail(format!("type {}: field names starting with '__' are reserved for ghost fields", t.id));
            }
        }
    }
    let mut sites = HashSet::new();
    for s in p.sites() {
        if !sites.insert(s) {
            return fail(format!("allocation site {s} declared twice"));
        }
    }
    for f in &p.functions {
        check_function(p, f)?;
    }
    if let Some(e) = &p.entry {
        if p.function(e).is_none() {
            return fail(format!("entry point {e} is not defined"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use crate::ir::parse_program;

    #[test]
    fn undefined_call_is_reported() {
        let e = parse_program("fn t() {\n  x = Box.get(y);\n  y = null;\n}").unwrap_err();
        assert!(e.to_string().contains("undefined function Box.get"), "{e}");
    }

    #[test]
    fn undeclared_variable_is_reported() {
        let e = parse_program("fn t() {\n  x = y;\n}").unwrap_err();
        assert!(e.to_string().contains("undeclared variable 'y'"), "{e}");
    }

    #[test]
    fn unknown_field_is_reported() {
        let e = parse_program("fn t() {\n  x = new Object;\n  y = x.g;\n}").unwrap_err();
        assert!(e.to_string().contains("field g"), "{e}");
    }
}
