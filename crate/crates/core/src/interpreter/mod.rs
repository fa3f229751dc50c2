//! Concrete executor for IR programs. It gives the oracle black-box access
//! to library implementations: a synthesized unit test is run against the
//! library bodies and the boolean it returns is reported.
//!
//! Semantics are call-by-reference-value. Variables that were never
//! assigned read as `null`, loads of unwritten fields read as `null`, and
//! dereferencing `null` stops execution with [`Outcome::NullDeref`].

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ir::{AllocSiteId, FieldId, FuncId, FunctionDef, Literal, Program, Stmt, TypeId, VarId};
use crate::synth::UnitTest;

/// Default step budget.
pub const DEFAULT_FUEL: u64 = 100_000;

/// Object identities. They are handed out in increasing order and never
/// reused within one heap.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct ObjRef(pub u64);

#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub enum Value {
    Null,
    Ref(ObjRef),
    Int(i64),
    Bool(bool),
    Char(char),
}

impl Value {
    fn from_literal(l: &Literal) -> Value {
        match l {
            Literal::Null => Value::Null,
            Literal::Int(i) => Value::Int(*i),
            Literal::Bool(b) => Value::Bool(*b),
            Literal::Char(c) => Value::Char(*c),
        }
    }

    /// Identity comparison: references compare by object, `null` equals
    /// `null`, primitives compare by value.
    pub fn same(&self, other: &Value) -> bool {
        self == other
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("null"),
            Value::Ref(r) => write!(f, "#{}", r.0),
            Value::Int(i) => write!(f, "{i}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Char(c) => write!(f, "'{c}'"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Object {
    pub ty: TypeId,
    pub site: AllocSiteId,
    pub fields: BTreeMap<FieldId, Value>,
}

#[derive(Clone, Debug, Default)]
pub struct Heap {
    pub objects: BTreeMap<ObjRef, Object>,
    next_ref: u64,
}

impl Heap {
    fn alloc(&mut self, ty: TypeId, site: AllocSiteId) -> ObjRef {
        let r = ObjRef(self.next_ref);
        self.next_ref += 1;
        self.objects.insert(r, Object { ty, site, fields: BTreeMap::new() });
        r
    }

    pub fn site_of(&self, r: ObjRef) -> &AllocSiteId {
        &self.objects[&r].site
    }
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub enum Outcome {
    /// The entry function finished. Void functions return `null`; a unit
    /// test returns the boolean of its final identity comparison.
    Returned(Value),
    /// A load or store through `null`; `func` and `index` locate the
    /// statement.
    NullDeref { func: FuncId, index: usize },
    OutOfFuel,
    UndefinedCall(FuncId),
}

#[derive(Clone, Debug)]
pub struct ExecResult {
    pub outcome: Outcome,
    pub steps: u64,
    /// Values of the unit-test comparison, when one was reached.
    pub compared: Option<(Value, Value)>,
}

impl ExecResult {
    pub fn returned_true(&self) -> bool {
        self.outcome == Outcome::Returned(Value::Bool(true))
    }
}

/// Dynamic points-to facts: for each variable, every allocation site of an
/// object it held at some point during execution.
pub type Observed = BTreeMap<VarId, BTreeSet<AllocSiteId>>;

struct Frame<'p> {
    func: &'p FunctionDef,
    pc: usize,
    env: HashMap<&'p str, Value>,
    /// Where the caller wants the return value.
    dst: Option<&'p str>,
}

struct Machine<'p> {
    lib: &'p Program,
    extra: Option<&'p FunctionDef>,
    heap: Heap,
    observed: Option<Observed>,
}

impl<'p> Machine<'p> {
    fn lookup(&self, id: &FuncId) -> Option<&'p FunctionDef> {
        match self.extra {
            Some(f) if &f.id == id => Some(f),
            _ => self.lib.function(id),
        }
    }

    fn write(&mut self, frame: &mut Frame<'p>, var: &'p str, v: Value) {
        if let (Some(obs), Value::Ref(r)) = (self.observed.as_mut(), v) {
            obs.entry(frame.func.var(var)).or_default().insert(self.heap.site_of(r).clone());
        }
        frame.env.insert(var, v);
    }

    fn run(&mut self, entry: &'p FunctionDef, fuel: u64) -> ExecResult {
        let mut stack = vec![Frame { func: entry, pc: 0, env: HashMap::new(), dst: None }];
        let mut steps = 0u64;
        let mut compared = None;
        let finish = |outcome, steps, compared| ExecResult { outcome, steps, compared };
        loop {
            let frame = stack.last_mut().expect("stack is never empty inside the loop");
            let func = frame.func;
            let Some(stmt) = func.body.get(frame.pc) else {
                // Fell off the end: return the declared return variable, if any.
                let v = func.ret.as_ref().map(|r| read(frame, &r.name)).unwrap_or(Value::Null);
                let done = stack.pop().expect("non-empty");
                match stack.last_mut() {
                    None => return finish(Outcome::Returned(v), steps, compared),
                    Some(caller) => {
                        if let Some(d) = done.dst {
                            self.write(caller, d, v);
                        }
                        caller.pc += 1;
                    }
                }
                continue;
            };
            if steps >= fuel {
                return finish(Outcome::OutOfFuel, steps, compared);
            }
            steps += 1;
            let index = frame.pc;
            let deref = |func: &FunctionDef| Outcome::NullDeref { func: func.id.clone(), index };
            match stmt {
                Stmt::Assign { dst, src } => {
                    let v = read(frame, src);
                    self.write(frame, dst, v);
                }
                Stmt::Alloc { dst, ty, site } => {
                    let r = self.heap.alloc(ty.clone(), site.clone());
                    self.write(frame, dst, Value::Ref(r));
                }
                Stmt::PrimInit { dst, lit } => {
                    self.write(frame, dst, Value::from_literal(lit));
                }
                Stmt::Store { base, field, src } => {
                    let v = read(frame, src);
                    let Value::Ref(b) = read(frame, base) else {
                        return finish(deref(func), steps, compared);
                    };
                    let obj = self.heap.objects.get_mut(&b).expect("live reference");
                    obj.fields.insert(field.clone(), v);
                }
                Stmt::Load { dst, base, field } => {
                    let Value::Ref(b) = read(frame, base) else {
                        return finish(deref(func), steps, compared);
                    };
                    let v = self.heap.objects[&b].fields.get(field).copied().unwrap_or(Value::Null);
                    self.write(frame, dst, v);
                }
                Stmt::Call { dst, func: callee, args } => {
                    let Some(target) = self.lookup(callee) else {
                        return finish(Outcome::UndefinedCall(callee.clone()), steps, compared);
                    };
                    let vals: Vec<Value> = args.iter().map(|a| read(frame, a)).collect();
                    let mut callee_frame =
                        Frame { func: target, pc: 0, env: HashMap::new(), dst: dst.as_deref() };
                    for (p, v) in target.params.iter().zip(vals) {
                        self.write(&mut callee_frame, &p.name, v);
                    }
                    stack.push(callee_frame);
                    continue;
                }
                Stmt::Return { src } => {
                    let v = read(frame, src);
                    let done = stack.pop().expect("non-empty");
                    match stack.last_mut() {
                        None => return finish(Outcome::Returned(v), steps, compared),
                        Some(caller) => {
                            if let Some(d) = done.dst {
                                self.write(caller, d, v);
                            }
                            caller.pc += 1;
                        }
                    }
                    continue;
                }
                Stmt::ReturnSame { lhs, rhs } => {
                    let (a, b) = (read(frame, lhs), read(frame, rhs));
                    compared = Some((a, b));
                    // Only client code may compare, so this is the entry frame.
                    return finish(Outcome::Returned(Value::Bool(a.same(&b))), steps, compared);
                }
            }
            stack.last_mut().expect("non-empty").pc += 1;
        }
    }
}

fn read(frame: &Frame<'_>, var: &str) -> Value {
    frame.env.get(var).copied().unwrap_or(Value::Null)
}

/// Runs the parameterless function `entry` of `p`.
pub fn run_function(p: &Program, entry: &FuncId, fuel: u64) -> ExecResult {
    run_traced(p, None, entry, fuel, false).0
}

/// Like [`run_function`], also recording which allocation sites each
/// variable held.
pub fn run_observed(p: &Program, entry: &FuncId, fuel: u64) -> (ExecResult, Observed) {
    let (r, o) = run_traced(p, None, entry, fuel, true);
    (r, o.unwrap_or_default())
}

fn run_traced(
    lib: &Program,
    extra: Option<&FunctionDef>,
    entry: &FuncId,
    fuel: u64,
    observe: bool,
) -> (ExecResult, Option<Observed>) {
    let mut m = Machine { lib, extra, heap: Heap::default(), observed: observe.then(BTreeMap::new) };
    let Some(f) = m.lookup(entry) else {
        let r = ExecResult { outcome: Outcome::UndefinedCall(entry.clone()), steps: 0, compared: None };
        return (r, m.observed);
    };
    let r = m.run(f, fuel);
    (r, m.observed)
}

/// Executes a synthesized unit test against the library implementation.
pub fn run_unit_test(test: &UnitTest, lib: &Program, fuel: u64) -> ExecResult {
    let f = test.to_function();
    run_traced(lib, Some(&f), &f.id, fuel, false).0
}
