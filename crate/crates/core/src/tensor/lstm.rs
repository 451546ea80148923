use super::{Tape, Var};
use crate::error::{shape_err, Result};

/// Weights of one LSTM direction. Gate blocks along the last axis are
/// ordered input, forget, candidate, output.
#[derive(Clone, Copy, Debug)]
pub struct LstmWeights {
    /// `d_in × 4d`
    pub wx: Var,
    /// `d × 4d`
    pub wh: Var,
    /// `4d`
    pub bias: Var,
}

/// One LSTM step on a batch: `x` is `B×d_in` (or `d_in`), `h`/`c` are `B×d`
/// (or `d`). Returns `(h_t, c_t)`.
pub fn lstm_cell(tape: &mut Tape, x: Var, h: Var, c: Var, w: &LstmWeights) -> Result<(Var, Var)> {
    let hidden = *tape.shape(h).last().expect("rank >= 1");
    if tape.shape(w.wh) != [hidden, 4 * hidden] {
        return shape_err(format!(
            "lstm recurrent weight must be {hidden}x{}, got {:?}",
            4 * hidden,
            tape.shape(w.wh)
        ));
    }
    if tape.shape(c) != tape.shape(h) {
        return shape_err("lstm hidden and cell state shapes differ");
    }
    let axis = tape.shape(h).len() - 1;
    let from_x = tape.linear(x, w.wx, Some(w.bias))?;
    let from_h = tape.linear(h, w.wh, None)?;
    let gates = tape.add(from_x, from_h)?;
    let i = tape.slice(gates, axis, 0, hidden)?;
    let f = tape.slice(gates, axis, hidden, hidden)?;
    let g = tape.slice(gates, axis, 2 * hidden, hidden)?;
    let o = tape.slice(gates, axis, 3 * hidden, hidden)?;
    let i = tape.sigmoid(i);
    let f = tape.sigmoid(f);
    let g = tape.tanh(g);
    let o = tape.sigmoid(o);
    let keep = tape.mul(f, c)?;
    let write = tape.mul(i, g)?;
    let c_t = tape.add(keep, write)?;
    let squashed = tape.tanh(c_t);
    let h_t = tape.mul(o, squashed)?;
    Ok((h_t, c_t))
}
