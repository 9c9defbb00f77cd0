use super::{Arg, BinOp, CalcError, CmpOp, Expr, Func, Value};

pub const MAX_EXPONENT: f64 = 1e6;

fn arith(msg: impl Into<String>) -> CalcError {
    CalcError::Arithmetic(msg.into())
}

fn finite(v: f64) -> Result<f64, CalcError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(arith("numeric overflow"))
    }
}

/// Python float modulo: the result takes the sign of the divisor.
pub fn py_mod(a: f64, b: f64) -> Result<f64, CalcError> {
    Ok(py_divmod(a, b)?.1)
}

/// Python float floor division.
pub fn py_floordiv(a: f64, b: f64) -> Result<f64, CalcError> {
    Ok(py_divmod(a, b)?.0)
}

// Port of CPython's float divmod.
fn py_divmod(a: f64, b: f64) -> Result<(f64, f64), CalcError> {
    if b == 0.0 {
        return Err(arith("division by zero"));
    }
    let mut m = a % b;
    let mut div = (a - m) / b;
    if m != 0.0 {
        if (b < 0.0) != (m < 0.0) {
            m += b;
            div -= 1.0;
        }
    } else {
        m = 0.0_f64.copysign(b);
    }
    let floordiv = if div != 0.0 {
        let mut f = div.floor();
        if div - f > 0.5 {
            f += 1.0;
        }
        f
    } else {
        0.0_f64.copysign(a / b)
    };
    Ok((finite(floordiv)?, finite(m)?))
}

pub fn py_pow(base: f64, exp: f64) -> Result<f64, CalcError> {
    if exp.abs() > MAX_EXPONENT {
        return Err(arith(format!("exponent magnitude exceeds {MAX_EXPONENT}")));
    }
    if base == 0.0 && exp < 0.0 {
        return Err(arith("zero raised to a negative power"));
    }
    if base < 0.0 && exp.fract() != 0.0 {
        return Err(arith("negative base with fractional exponent"));
    }
    finite(base.powf(exp))
}

/// Round half to even at `ndigits` decimal places.
pub fn py_round(x: f64, ndigits: Option<i64>) -> Result<f64, CalcError> {
    let Some(n) = ndigits else {
        return finite(x.round_ties_even());
    };
    if n > 308 {
        return Ok(x);
    }
    if n < -308 {
        return Ok(0.0_f64.copysign(x));
    }
    let scale = 10f64.powi(n.unsigned_abs() as i32);
    let r = if n >= 0 {
        let y = x * scale;
        if !y.is_finite() {
            return Ok(x);
        }
        y.round_ties_even() / scale
    } else {
        (x / scale).round_ties_even() * scale
    };
    finite(r)
}

fn compare(op: CmpOp, a: f64, b: f64) -> bool {
    match op {
        CmpOp::Lt => a < b,
        CmpOp::Le => a <= b,
        CmpOp::Gt => a > b,
        CmpOp::Ge => a >= b,
        CmpOp::Eq => a == b,
        CmpOp::Ne => a != b,
    }
}

pub(super) fn eval(e: &Expr) -> Result<Value, CalcError> {
    match e {
        Expr::Num(v) => Ok(Value::Num(*v)),
        Expr::Neg(inner) => Ok(Value::Num(-eval(inner)?.as_f64())),
        Expr::Bin(op, l, r) => {
            let a = eval(l)?.as_f64();
            let b = eval(r)?.as_f64();
            let v = match op {
                BinOp::Add => finite(a + b)?,
                BinOp::Sub => finite(a - b)?,
                BinOp::Mul => finite(a * b)?,
                BinOp::Div => {
                    if b == 0.0 {
                        return Err(arith("division by zero"));
                    }
                    finite(a / b)?
                }
                BinOp::FloorDiv => py_floordiv(a, b)?,
                BinOp::Mod => py_mod(a, b)?,
                BinOp::Pow => py_pow(a, b)?,
            };
            Ok(Value::Num(v))
        }
        Expr::Compare(first, rest) => {
            let mut lhs = eval(first)?.as_f64();
            let mut result = true;
            for (op, rhs_expr) in rest {
                let rhs = eval(rhs_expr)?.as_f64();
                if !compare(*op, lhs, rhs) {
                    result = false;
                }
                lhs = rhs;
            }
            Ok(Value::Bool(result))
        }
        Expr::Call(func, args) => call(*func, args),
    }
}

enum Evaluated {
    Scalar(Value),
    List(Vec<Value>),
}

fn call(func: Func, args: &[Arg]) -> Result<Value, CalcError> {
    let mut vals = Vec::with_capacity(args.len());
    for a in args {
        vals.push(match a {
            Arg::Expr(e) => Evaluated::Scalar(eval(e)?),
            Arg::List(items) => Evaluated::List(items.iter().map(eval).collect::<Result<_, _>>()?),
        });
    }
    let name = func.name();
    let bad = || arith(format!("invalid arguments to {name}()"));
    match func {
        Func::Min | Func::Max => {
            let items: Vec<Value> = match vals.as_slice() {
                [Evaluated::List(items)] => items.clone(),
                [_] | [] => return Err(bad()),
                many => many
                    .iter()
                    .map(|v| match v {
                        Evaluated::Scalar(s) => Ok(*s),
                        Evaluated::List(_) => Err(bad()),
                    })
                    .collect::<Result<_, _>>()?,
            };
            let mut best = *items.first().ok_or_else(|| arith(format!("{name}() of an empty list")))?;
            for v in &items[1..] {
                let better = if func == Func::Min {
                    v.as_f64() < best.as_f64()
                } else {
                    v.as_f64() > best.as_f64()
                };
                if better {
                    best = *v;
                }
            }
            Ok(best)
        }
        Func::Sum => {
            let (items, start) = match vals.as_slice() {
                [Evaluated::List(items)] => (items, 0.0),
                [Evaluated::List(items), Evaluated::Scalar(s)] => (items, s.as_f64()),
                _ => return Err(bad()),
            };
            let mut total = start;
            for v in items {
                total = finite(total + v.as_f64())?;
            }
            Ok(Value::Num(total))
        }
        Func::Abs => match vals.as_slice() {
            [Evaluated::Scalar(v)] => Ok(Value::Num(v.as_f64().abs())),
            _ => Err(bad()),
        },
        Func::Round => match vals.as_slice() {
            [Evaluated::Scalar(v)] => Ok(Value::Num(py_round(v.as_f64(), None)?)),
            [Evaluated::Scalar(v), Evaluated::Scalar(n)] => {
                let n = n.as_f64();
                if n.fract() != 0.0 {
                    return Err(arith("round() digits must be an integer"));
                }
                Ok(Value::Num(py_round(v.as_f64(), Some(n as i64))?))
            }
            _ => Err(bad()),
        },
    }
}
