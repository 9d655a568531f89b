//! User expressions in the coordinates `x1, x2, x3`.

use std::sync::Arc;

use evalexpr::{ContextWithMutableVariables, DefaultNumericTypes, HashMapContext, Node, Value};
use malab_core::RealFn;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone)]
pub struct Expr {
    source: String,
    tree: Arc<Node<DefaultNumericTypes>>,
}

const VARS: [&str; 3] = ["x1", "x2", "x3"];

impl Expr {
    /// Parses and test-evaluates the expression at the origin of `dim` space.
    pub fn parse(source: &str, dim: usize) -> CliResult<Self> {
        let tree = evalexpr::build_operator_tree::<DefaultNumericTypes>(source)
            .map_err(|e| CliError::usage(format!("expression `{source}`: {e}")))?;
        let e = Expr {
            source: source.to_string(),
            tree: Arc::new(tree),
        };
        e.try_eval(&vec![0.0; dim])?;
        Ok(e)
    }

    pub fn try_eval(&self, x: &[f64]) -> CliResult<f64> {
        let mut ctx = HashMapContext::<DefaultNumericTypes>::new();
        for (name, v) in VARS.iter().zip(x) {
            ctx.set_value(name.to_string(), Value::Float(*v))
                .map_err(|e| CliError::usage(format!("expression `{}`: {e}", self.source)))?;
        }
        self.tree
            .eval_number_with_context(&ctx)
            .map_err(|e| CliError::usage(format!("expression `{}`: {e}", self.source)))
    }

    /// Evaluation that yields NaN on failure; NaN values surface as solver
    /// input errors.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.try_eval(x).unwrap_or(f64::NAN)
    }

    pub fn into_fn(self) -> RealFn {
        Arc::new(move |x| self.eval(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluates_coordinates() {
        let e = Expr::parse("0.5 * (x1 * x1 + x2 * x2) + math::sqrt(x2)", 2).unwrap();
        assert!((e.eval(&[1.0, 4.0]) - (8.5 + 2.0)).abs() < 1e-15);
        let i = Expr::parse("2", 2).unwrap();
        assert_eq!(i.eval(&[0.0, 0.0]), 2.0);
    }

    #[test]
    fn unknown_variable_is_usage_error() {
        assert!(matches!(Expr::parse("y + 1", 2), Err(CliError::Usage(_))));
        assert!(matches!(Expr::parse("x1 +", 2), Err(CliError::Usage(_))));
    }
}
