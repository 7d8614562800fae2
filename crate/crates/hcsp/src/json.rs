//! JSON encoding of states, trajectories and traces.
//!
//! Traces round-trip exactly: trajectories are stored symbolically (ODE
//! field and initial state, shifts, merges) rather than as samples.

use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use hcsp_core::runtime::{OdeSol, PwlPath};
use hcsp_core::syntax::{parse_expr, CommDir, Dir};
use hcsp_core::{Event, ReadySet, State, Trace, Trajectory};
use serde_json::{json, Map, Value};

fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x > 0.0 {
        json!("inf")
    } else if x < 0.0 {
        json!("-inf")
    } else {
        json!("nan")
    }
}

fn get_num(v: &Value) -> Result<f64> {
    match v {
        Value::Number(n) => n.as_f64().ok_or_else(|| anyhow!("bad number {n}")),
        Value::String(s) if s == "inf" => Ok(f64::INFINITY),
        Value::String(s) if s == "-inf" => Ok(f64::NEG_INFINITY),
        _ => bail!("expected a number, got {v}"),
    }
}

pub fn state_to_json(s: &State) -> Value {
    Value::Object(s.iter().map(|(x, v)| (x.to_string(), num(v))).collect())
}

pub fn state_from_json(v: &Value) -> Result<State> {
    let obj = v.as_object().ok_or_else(|| anyhow!("a state is an object of numbers, got {v}"))?;
    let mut s = State::new();
    for (x, v) in obj {
        s.set(x, get_num(v).with_context(|| format!("variable {x}"))?);
    }
    Ok(s)
}

fn dir_symbol(d: Dir) -> &'static str {
    match d {
        Dir::Out => "!",
        Dir::In => "?",
        Dir::Sync => "",
    }
}

fn dir_from(s: &str) -> Result<Dir> {
    Ok(match s {
        "!" => Dir::Out,
        "?" => Dir::In,
        "" => Dir::Sync,
        _ => bail!("unknown direction {s:?}"),
    })
}

fn cd_string(cd: &CommDir) -> String {
    format!("{}{}", cd.ch, dir_symbol(cd.dir))
}

fn cd_from(s: &str) -> Result<CommDir> {
    if let Some(ch) = s.strip_suffix('!') {
        Ok(CommDir::output(ch))
    } else if let Some(ch) = s.strip_suffix('?') {
        Ok(CommDir::input(ch))
    } else {
        bail!("ready-set entries end in ! or ?, got {s:?}")
    }
}

pub fn traj_to_json(t: &Trajectory) -> Value {
    match t {
        Trajectory::Const(s) => json!({ "const": state_to_json(s) }),
        Trajectory::Ode(sol) => json!({ "ode": {
            "field": sol.field.iter().map(|(x, e)| json!([x, e.to_string()])).collect::<Vec<_>>(),
            "init": state_to_json(&sol.init),
            "step": sol.step,
        }}),
        Trajectory::Shift(p, d) => json!({ "shift": { "traj": traj_to_json(p), "by": num(*d) } }),
        Trajectory::Merge(p, q) => json!({ "merge": [traj_to_json(p), traj_to_json(q)] }),
        Trajectory::Glue(p, d, q) => {
            json!({ "glue": { "first": traj_to_json(p), "at": num(*d), "then": traj_to_json(q) } })
        }
        Trajectory::Pwl(path) => json!({ "pwl": {
            "h": path.h,
            "vars": path.vars,
            "base": state_to_json(&path.base),
            "vertices": path.vertices,
        }}),
    }
}

pub fn traj_from_json(v: &Value) -> Result<Trajectory> {
    let obj = v.as_object().filter(|o| o.len() == 1).ok_or_else(|| anyhow!("bad trajectory {v}"))?;
    let (k, body) = obj.iter().next().expect("one key");
    Ok(match k.as_str() {
        "const" => Trajectory::Const(state_from_json(body)?),
        "ode" => {
            let mut field = Vec::new();
            for pair in body["field"].as_array().ok_or_else(|| anyhow!("ode.field must be a list"))? {
                let (Some(x), Some(e)) = (pair[0].as_str(), pair[1].as_str()) else {
                    bail!("ode.field entries are [var, expr]");
                };
                field.push((x.to_string(), parse_expr(e)?));
            }
            let init = state_from_json(&body["init"])?;
            let step = get_num(&body["step"])?;
            Trajectory::Ode(Arc::new(OdeSol::new(Arc::new(field), init, step)?))
        }
        "shift" => traj_from_json(&body["traj"])?.shift(get_num(&body["by"])?),
        "merge" => {
            let parts = body.as_array().filter(|a| a.len() == 2).ok_or_else(|| anyhow!("merge takes two"))?;
            traj_from_json(&parts[0])?.merge(traj_from_json(&parts[1])?)
        }
        "glue" => Trajectory::Glue(
            Box::new(traj_from_json(&body["first"])?),
            get_num(&body["at"])?,
            Box::new(traj_from_json(&body["then"])?),
        ),
        "pwl" => {
            let vars = body["vars"]
                .as_array()
                .ok_or_else(|| anyhow!("pwl.vars"))?
                .iter()
                .map(|x| x.as_str().map(String::from).ok_or_else(|| anyhow!("pwl.vars")))
                .collect::<Result<Vec<_>>>()?;
            let vertices = body["vertices"]
                .as_array()
                .ok_or_else(|| anyhow!("pwl.vertices"))?
                .iter()
                .map(|row| {
                    row.as_array().ok_or_else(|| anyhow!("pwl row"))?.iter().map(get_num).collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            let path = PwlPath { h: get_num(&body["h"])?, vars, base: state_from_json(&body["base"])?, vertices };
            Trajectory::Pwl(Arc::new(path))
        }
        _ => bail!("unknown trajectory kind {k:?}"),
    })
}

pub fn event_to_json(e: &Event) -> Value {
    match e {
        Event::Comm { cd, value } => json!({ "comm": cd.ch, "dir": dir_symbol(cd.dir), "value": num(*value) }),
        Event::Wait { dur, traj, rdy } => json!({
            "wait": num(*dur),
            "rdy": rdy.iter().map(cd_string).collect::<Vec<_>>(),
            "traj": traj_to_json(traj),
        }),
    }
}

pub fn event_from_json(v: &Value) -> Result<Event> {
    if let Some(ch) = v.get("comm") {
        let ch = ch.as_str().ok_or_else(|| anyhow!("comm must name a channel"))?;
        let dir = dir_from(v.get("dir").and_then(Value::as_str).unwrap_or(""))?;
        return Ok(Event::comm(ch, dir, get_num(&v["value"])?));
    }
    if let Some(d) = v.get("wait") {
        let rdy: ReadySet = match v.get("rdy") {
            None => ReadySet::new(),
            Some(r) => r
                .as_array()
                .ok_or_else(|| anyhow!("rdy must be a list"))?
                .iter()
                .map(|x| cd_from(x.as_str().unwrap_or_default()))
                .collect::<Result<_>>()?,
        };
        let traj = match v.get("traj") {
            Some(t) => traj_from_json(t)?,
            None => Trajectory::Const(State::new()),
        };
        return Ok(Event::wait(get_num(d)?, traj, rdy));
    }
    bail!("an event has a `comm` or a `wait` key: {v}")
}

pub fn trace_to_json(t: &Trace) -> Value {
    json!({ "events": t.events.iter().map(event_to_json).collect::<Vec<_>>(), "delta": t.delta })
}

pub fn trace_from_json(v: &Value) -> Result<Trace> {
    let events = v["events"].as_array().ok_or_else(|| anyhow!("a trace has an `events` list"))?;
    let events = events.iter().map(event_from_json).collect::<Result<Vec<_>>>()?;
    let delta = v.get("delta").and_then(Value::as_bool).unwrap_or(false);
    Ok(Trace { events, delta })
}

/// Sorted keys, for stable output.
pub fn object(pairs: Vec<(&str, Value)>) -> Value {
    Value::Object(pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect::<Map<_, _>>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use hcsp_core::exec_big::{big_step, ExecConfig};
    use hcsp_core::oracle::RandomOracle;
    use hcsp_core::parse_process;

    #[test]
    fn executor_traces_round_trip() {
        let p = parse_process("<x_dot = 1, y_dot = x & x < 2> |> [](c!x --> wait 1); d?y ||[d]|| (z := 1; d!z)").unwrap();
        let s = State::from_pairs(&[("x", 0.0), ("y", 0.0), ("z", 0.0)]);
        for seed in 0..20 {
            let r = big_step(&p, &s, &mut RandomOracle::new(seed), &ExecConfig::default()).unwrap();
            let v = trace_to_json(&r.trace);
            let back = trace_from_json(&v).unwrap();
            assert!(back.approx_eq(&r.trace, 0.0), "{} vs {}", back, r.trace);
            assert_eq!(trace_to_json(&back), v);
        }
    }

    #[test]
    fn infinite_wait_and_states() {
        let t = Trace {
            events: vec![Event::wait(f64::INFINITY, Trajectory::Const(State::from_pairs(&[("x", 1.5)])), ReadySet::new())],
            delta: false,
        };
        let v = trace_to_json(&t);
        assert_eq!(v["events"][0]["wait"], json!("inf"));
        assert!(trace_from_json(&v).unwrap().approx_eq(&t, 0.0));
        assert!(state_from_json(&json!({"x": "oops"})).is_err());
    }
}
