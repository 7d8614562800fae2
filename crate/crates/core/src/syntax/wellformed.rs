use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::process::{Dir, Process};

/// Static checks on parallel composition. Returns human-readable violations.
pub fn check_wellformed(p: &Process) -> Vec<String> {
    let mut out = Vec::new();
    walk(p, true, &mut out);
    out
}

fn walk(p: &Process, top: bool, out: &mut Vec<String>) {
    match p {
        Process::Par(a, _, b) => {
            if !top {
                out.push(format!("parallel composition inside a sequential context: {p}"));
            }
            for x in a.vars().intersection(&b.vars()) {
                out.push(format!("shared variable {x}"));
            }
            let (ca, cb) = (a.comm_dirs(), b.comm_dirs());
            for cd in ca.intersection(&cb) {
                let d = if cd.dir == Dir::Out { "!" } else { "?" };
                out.push(format!("{}{} on both sides", cd.ch, d));
            }
            walk(a, top, out);
            walk(b, top, out);
        }
        Process::IChoice(a, b) | Process::Seq(a, b) | Process::Cond(_, a, b) => {
            walk(a, false, out);
            walk(b, false, out);
        }
        Process::Rep(a) => walk(a, false, out),
        Process::Interrupt(o, bs) => {
            if bs.is_empty() {
                out.push(format!("interrupt without branches: {o}"));
            }
            for b in bs {
                walk(&b.body, false, out);
            }
        }
        Process::Skip
        | Process::Assign(..)
        | Process::Input(..)
        | Process::Output(..)
        | Process::Wait(_)
        | Process::Ode(_) => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_process;

    fn wf(src: &str) -> Vec<String> {
        check_wellformed(&parse_process(src).unwrap())
    }

    #[test]
    fn shared_variable_is_reported() {
        assert_eq!(wf("x := 1 ||[]|| x := 2"), ["shared variable x"]);
    }

    #[test]
    fn complementary_channel_is_fine() {
        assert!(wf("ch!1 ||[ch]|| ch?y").is_empty());
    }

    #[test]
    fn same_direction_on_both_sides() {
        assert_eq!(wf("ch!1 ||[ch]|| ch!2"), ["ch! on both sides"]);
    }

    #[test]
    fn nested_par_allowed_only_at_top() {
        assert!(wf("(a!1 ||[]|| b!2) ||[a, b]|| (a?x; b?y)").is_empty());
        assert_eq!(wf("skip; (skip ||[]|| skip)").len(), 1);
    }
}
