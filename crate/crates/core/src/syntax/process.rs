use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use super::expr::{BExpr, Expr};

/// Direction of a channel use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Dir {
    In,
    Out,
    /// A synchronized communication inside a parallel composition.
    Sync,
}

impl Dir {
    pub fn symbol(self) -> &'static str {
        match self {
            Dir::In => "?",
            Dir::Out => "!",
            Dir::Sync => "",
        }
    }

    pub fn dual(self) -> Dir {
        match self {
            Dir::In => Dir::Out,
            Dir::Out => Dir::In,
            Dir::Sync => Dir::Sync,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CommDir {
    pub ch: String,
    pub dir: Dir,
}

impl CommDir {
    pub fn new(ch: &str, dir: Dir) -> Self {
        CommDir { ch: ch.to_string(), dir }
    }

    pub fn input(ch: &str) -> Self {
        CommDir::new(ch, Dir::In)
    }

    pub fn output(ch: &str) -> Self {
        CommDir::new(ch, Dir::Out)
    }

    pub fn dual(&self) -> Self {
        CommDir { ch: self.ch.clone(), dir: self.dir.dual() }
    }
}

impl fmt::Display for CommDir {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.ch, self.dir.symbol())
    }
}

/// Ordered vector field `x_dot = e, ...`.
pub type Field = Vec<(String, Expr)>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ode {
    pub field: Arc<Field>,
    pub domain: BExpr,
}

impl Ode {
    pub fn new(field: Field, domain: BExpr) -> Self {
        Ode { field: Arc::new(field), domain }
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.field.iter().map(|(x, _)| x.as_str())
    }
}

/// Communication prefix of an interrupt branch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Comm {
    In(String, String),
    Out(String, Expr),
}

impl Comm {
    pub fn channel(&self) -> &str {
        match self {
            Comm::In(ch, _) | Comm::Out(ch, _) => ch,
        }
    }

    pub fn comm_dir(&self) -> CommDir {
        match self {
            Comm::In(ch, _) => CommDir::input(ch),
            Comm::Out(ch, _) => CommDir::output(ch),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Branch {
    pub comm: Comm,
    pub body: Process,
}

pub type ChanSet = BTreeSet<String>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Process {
    Skip,
    Assign(String, Expr),
    Input(String, String),
    Output(String, Expr),
    Wait(Expr),
    IChoice(Box<Process>, Box<Process>),
    Seq(Box<Process>, Box<Process>),
    Rep(Box<Process>),
    Cond(BExpr, Box<Process>, Box<Process>),
    Ode(Ode),
    Interrupt(Ode, Vec<Branch>),
    Par(Box<Process>, ChanSet, Box<Process>),
}

impl Process {
    pub fn assign(x: &str, e: Expr) -> Process {
        Process::Assign(x.to_string(), e)
    }

    pub fn input(ch: &str, x: &str) -> Process {
        Process::Input(ch.to_string(), x.to_string())
    }

    pub fn output(ch: &str, e: Expr) -> Process {
        Process::Output(ch.to_string(), e)
    }

    pub fn seq(a: Process, b: Process) -> Process {
        Process::Seq(Box::new(a), Box::new(b))
    }

    /// Right-nested sequence; `skip` when empty.
    pub fn seq_all(ps: Vec<Process>) -> Process {
        let mut it = ps.into_iter().rev();
        let Some(mut acc) = it.next() else { return Process::Skip };
        for p in it {
            acc = Process::seq(p, acc);
        }
        acc
    }

    pub fn ichoice(a: Process, b: Process) -> Process {
        Process::IChoice(Box::new(a), Box::new(b))
    }

    pub fn rep(a: Process) -> Process {
        Process::Rep(Box::new(a))
    }

    pub fn cond(b: BExpr, p: Process, q: Process) -> Process {
        Process::Cond(b, Box::new(p), Box::new(q))
    }

    pub fn par(a: Process, cs: &[&str], b: Process) -> Process {
        Process::Par(Box::new(a), cs.iter().map(|c| c.to_string()).collect(), Box::new(b))
    }

    pub fn is_parallel(&self) -> bool {
        matches!(self, Process::Par(..))
    }

    /// True when the process contains no ODE, interrupt or wait.
    pub fn is_discrete(&self) -> bool {
        match self {
            Process::Skip | Process::Assign(..) | Process::Input(..) | Process::Output(..) => true,
            Process::Wait(_) | Process::Ode(_) | Process::Interrupt(..) => false,
            Process::IChoice(a, b) | Process::Seq(a, b) | Process::Cond(_, a, b) | Process::Par(a, _, b) => {
                a.is_discrete() && b.is_discrete()
            }
            Process::Rep(a) => a.is_discrete(),
        }
    }

    /// Every variable read or written.
    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Process::Skip => {}
            Process::Assign(x, e) => {
                out.insert(x.clone());
                e.collect_vars(out);
            }
            Process::Input(_, x) => {
                out.insert(x.clone());
            }
            Process::Output(_, e) | Process::Wait(e) => e.collect_vars(out),
            Process::IChoice(a, b) | Process::Seq(a, b) | Process::Par(a, _, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Process::Rep(a) => a.collect_vars(out),
            Process::Cond(c, a, b) => {
                c.collect_vars(out);
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Process::Ode(o) => ode_vars(o, out),
            Process::Interrupt(o, bs) => {
                ode_vars(o, out);
                for b in bs {
                    match &b.comm {
                        Comm::In(_, x) => {
                            out.insert(x.clone());
                        }
                        Comm::Out(_, e) => e.collect_vars(out),
                    }
                    b.body.collect_vars(out);
                }
            }
        }
    }

    /// Variables updated by assignment, input or continuous evolution.
    pub fn wvar(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_wvar(&mut out);
        out
    }

    fn collect_wvar(&self, out: &mut BTreeSet<String>) {
        match self {
            Process::Skip | Process::Output(..) | Process::Wait(_) => {}
            Process::Assign(x, _) | Process::Input(_, x) => {
                out.insert(x.clone());
            }
            Process::IChoice(a, b) | Process::Seq(a, b) | Process::Cond(_, a, b) | Process::Par(a, _, b) => {
                a.collect_wvar(out);
                b.collect_wvar(out);
            }
            Process::Rep(a) => a.collect_wvar(out),
            Process::Ode(o) => out.extend(o.vars().map(String::from)),
            Process::Interrupt(o, bs) => {
                out.extend(o.vars().map(String::from));
                for b in bs {
                    if let Comm::In(_, x) = &b.comm {
                        out.insert(x.clone());
                    }
                    b.body.collect_wvar(out);
                }
            }
        }
    }

    /// Channel directions used anywhere in the process.
    pub fn comm_dirs(&self) -> BTreeSet<CommDir> {
        let mut out = BTreeSet::new();
        self.collect_comms(&mut out);
        out
    }

    fn collect_comms(&self, out: &mut BTreeSet<CommDir>) {
        match self {
            Process::Skip | Process::Assign(..) | Process::Wait(_) | Process::Ode(_) => {}
            Process::Input(ch, _) => {
                out.insert(CommDir::input(ch));
            }
            Process::Output(ch, _) => {
                out.insert(CommDir::output(ch));
            }
            Process::IChoice(a, b) | Process::Seq(a, b) | Process::Cond(_, a, b) | Process::Par(a, _, b) => {
                a.collect_comms(out);
                b.collect_comms(out);
            }
            Process::Rep(a) => a.collect_comms(out),
            Process::Interrupt(_, bs) => {
                for b in bs {
                    out.insert(b.comm.comm_dir());
                    b.body.collect_comms(out);
                }
            }
        }
    }

    /// Number of AST nodes.
    pub fn size(&self) -> usize {
        1 + match self {
            Process::Skip
            | Process::Assign(..)
            | Process::Input(..)
            | Process::Output(..)
            | Process::Wait(_)
            | Process::Ode(_) => 0,
            Process::IChoice(a, b) | Process::Seq(a, b) | Process::Cond(_, a, b) | Process::Par(a, _, b) => {
                a.size() + b.size()
            }
            Process::Rep(a) => a.size(),
            Process::Interrupt(_, bs) => bs.iter().map(|b| b.body.size()).sum(),
        }
    }
}

fn ode_vars(o: &Ode, out: &mut BTreeSet<String>) {
    for (x, e) in o.field.iter() {
        out.insert(x.clone());
        e.collect_vars(out);
    }
    o.domain.collect_vars(out);
}
