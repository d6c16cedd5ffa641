//! The built-in library, registered as `"testlib"`.
//!
//! | function        | arguments        | results                                  |
//! |-----------------|------------------|------------------------------------------|
//! | `truncated_svd` | handle A, int k  | matrices U (m x k), S (k x 1), V (n x k) |
//! | `multiply`      | handle A, handle B | matrix C                               |
//! | `reset`         |                  | float x, float target, int steps         |
//! | `step`          | float action     | float x, float target, int steps, float score |
//! | `get_state`     |                  | float x, float target, int steps         |
//! | `get_score`     |                  | float score                              |

pub mod linalg;
mod multiply;
mod sim;
mod svd;

pub use multiply::multiply;
pub use sim::{SimState, MAX_STEP};
pub use svd::{truncated_svd, SvdResult};

use crate::error::{Error, Result};
use crate::protocol::TaskValue;
use crate::server::{Library, TaskContext};

pub struct TestLib;

pub const TESTLIB: &str = "testlib";

fn arity(function: &str, args: &[TaskValue], n: usize) -> Result<()> {
    if args.len() != n {
        return Err(Error::InvalidArgument(format!("{function} takes {n} arguments, got {}", args.len())));
    }
    Ok(())
}

fn state_values(s: &SimState) -> Vec<TaskValue> {
    vec![TaskValue::Float(s.x()), TaskValue::Float(s.target()), TaskValue::Int(s.steps() as i64)]
}

impl Library for TestLib {
    fn name(&self) -> &'static str {
        TESTLIB
    }

    fn call(&self, ctx: &mut TaskContext<'_>, function: &str, args: &[TaskValue]) -> Result<Vec<TaskValue>> {
        match function {
            "truncated_svd" => {
                arity(function, args, 2)?;
                let r = truncated_svd(ctx, &args[0], &args[1])?;
                Ok(vec![TaskValue::Matrix(r.u), TaskValue::Matrix(r.s), TaskValue::Matrix(r.v)])
            }
            "multiply" => {
                arity(function, args, 2)?;
                Ok(vec![TaskValue::Matrix(multiply(ctx, &args[0], &args[1])?)])
            }
            "reset" => {
                arity(function, args, 0)?;
                ctx.sim.reset();
                Ok(state_values(&ctx.sim))
            }
            "step" => {
                arity(function, args, 1)?;
                let action = args[0]
                    .as_float()
                    .ok_or_else(|| Error::InvalidArgument(format!("step takes a number, got {:?}", args[0])))?;
                ctx.sim.step(action)?;
                let mut out = state_values(&ctx.sim);
                out.push(TaskValue::Float(ctx.sim.score()));
                Ok(out)
            }
            "get_state" => {
                arity(function, args, 0)?;
                Ok(state_values(&ctx.sim))
            }
            "get_score" => {
                arity(function, args, 0)?;
                Ok(vec![TaskValue::Float(ctx.sim.score())])
            }
            other => Err(Error::UnknownFunction(format!("{TESTLIB}.{other}"))),
        }
    }
}

static REGISTRY: [&dyn Library; 1] = [&TestLib];

/// Id under which `name` is registered; ids start at 1.
pub fn library_id(name: &str) -> Option<u32> {
    REGISTRY.iter().position(|l| l.name() == name).map(|i| i as u32 + 1)
}

pub fn library(id: u32) -> Option<&'static dyn Library> {
    REGISTRY.get((id as usize).checked_sub(1)?).copied()
}
