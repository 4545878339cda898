//! Two-asset geometric mean market maker with a proportional fee.
//!
//! A pool holds reserves `(x, y)` of assets X and Y with weight `w` on X and
//! keeps the liquidity `ℓ = x^w y^(1-w)`. Traders pay the fee `1 - γ` on the
//! asset they put into the pool: a trade is feasible when the invariant holds
//! with only `γ` of the paid-in amount counted, after which the reserves move
//! by the full amounts and `ℓ` is recomputed. With `γ < 1` every non-null
//! trade strictly grows `ℓ`.

use serde::Serialize;

use crate::error::{domain, Error, Result};

/// Entropy `-w ln w - (1-w) ln(1-w)` of the weight split.
pub fn weight_entropy(w: f64) -> f64 {
    -w * w.ln() - (1.0 - w) * (1.0 - w).ln()
}

/// Immutable pool state. Every operation returns a new value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoolState {
    x: f64,
    y: f64,
    w: f64,
    gamma: f64,
    ell: f64,
}

/// The asset a fee was charged on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Asset {
    X,
    Y,
}

/// One side of a trade, expressed by the signed change of the X reserve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Leg {
    /// Trader sells `dx >= 0` of X to the pool.
    SellX { dx: f64 },
    /// Trader buys `-dx` of X from the pool, `dx <= 0`.
    BuyX { dx: f64 },
}

impl Leg {
    /// Picks the leg from the sign of `dx`.
    pub fn from_delta_x(dx: f64) -> Leg {
        if dx >= 0.0 {
            Leg::SellX { dx }
        } else {
            Leg::BuyX { dx }
        }
    }

    pub fn delta_x(&self) -> f64 {
        match *self {
            Leg::SellX { dx } | Leg::BuyX { dx } => dx,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TradeResult {
    pub delta_x: f64,
    pub delta_y: f64,
    pub fee_side: Asset,
    pub new_state: PoolState,
    /// `ln(ℓ_new / ℓ_old)`, never negative.
    pub liquidity_growth: f64,
}

/// Log-wealth of the pool's holdings, split into liquidity, price and
/// entropy terms. `d` and `z` are filled when a reference price is supplied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WealthDecomposition {
    pub ln_v: f64,
    pub ln_ell: f64,
    pub w_ln_p: f64,
    pub entropy: f64,
    pub d: Option<f64>,
    pub z: Option<f64>,
}

fn check_params(x: f64, y: f64, w: f64, gamma: f64) -> Result<()> {
    if !(x.is_finite() && x > 0.0) {
        return domain(format!("reserve x must be positive and finite, got {x}"));
    }
    if !(y.is_finite() && y > 0.0) {
        return domain(format!("reserve y must be positive and finite, got {y}"));
    }
    if !(w > 0.0 && w < 1.0) {
        return domain(format!("weight out of range (0,1): {w}"));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return domain(format!("gamma out of range (0,1]: {gamma}"));
    }
    Ok(())
}

impl PoolState {
    pub fn new(x: f64, y: f64, w: f64, gamma: f64) -> Result<PoolState> {
        check_params(x, y, w, gamma)?;
        Ok(PoolState {
            x,
            y,
            w,
            gamma,
            ell: liquidity(x, y, w),
        })
    }

    /// Builds the pool with liquidity `ell` quoting `price` for X in Y.
    pub fn from_liquidity_price(ell: f64, price: f64, w: f64, gamma: f64) -> Result<PoolState> {
        if !(ell > 0.0 && price > 0.0 && ell.is_finite() && price.is_finite()) {
            return domain("liquidity and price must be positive and finite");
        }
        if !(w > 0.0 && w < 1.0) {
            return domain(format!("weight out of range (0,1): {w}"));
        }
        let ln_x =
            ell.ln() - (1.0 - w) * price.ln() - (1.0 - w) * (1.0 - w).ln() + (1.0 - w) * w.ln();
        let ln_y = ell.ln() + w * price.ln() + w * (1.0 - w).ln() - w * w.ln();
        PoolState::new(ln_x.exp(), ln_y.exp(), w, gamma)
    }

    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    pub fn w(&self) -> f64 {
        self.w
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn ell(&self) -> f64 {
        self.ell
    }

    /// Marginal price of X in units of Y, `w/(1-w) · y/x`.
    pub fn spot_price(&self) -> f64 {
        self.w / (1.0 - self.w) * self.y / self.x
    }

    /// `(γP, P/γ)`: the marginal rates for selling and buying X.
    pub fn quote_bid_ask(&self) -> (f64, f64) {
        let p = self.spot_price();
        (self.gamma * p, p / self.gamma)
    }

    /// Executes a trade, solving the fee-adjusted invariant for `Δy` in
    /// closed form.
    pub fn execute_trade(&self, leg: Leg) -> Result<TradeResult> {
        let dx = leg.delta_x();
        if !dx.is_finite() {
            return domain(format!("trade size must be finite, got {dx}"));
        }
        let exponent = self.w / (1.0 - self.w);
        let (delta_y, fee_side) = match leg {
            Leg::SellX { dx } => {
                if dx < 0.0 {
                    return domain(format!("sell leg needs dx >= 0, got {dx}"));
                }
                // (x + γΔx)^w (y + Δy)^(1-w) = x^w y^(1-w)
                let dy = self.y * (-exponent * (self.gamma * dx / self.x).ln_1p()).exp_m1();
                (dy, Asset::X)
            }
            Leg::BuyX { dx } => {
                if dx > 0.0 {
                    return domain(format!("buy leg needs dx <= 0, got {dx}"));
                }
                if dx <= -self.x {
                    return Err(Error::InsufficientReserve {
                        requested: -dx,
                        available: self.x,
                    });
                }
                // (x + Δx)^w (y + γΔy)^(1-w) = x^w y^(1-w)
                let dy = self.y * (-exponent * (dx / self.x).ln_1p()).exp_m1() / self.gamma;
                (dy, Asset::Y)
            }
        };
        if dx == 0.0 {
            return Ok(TradeResult {
                delta_x: 0.0,
                delta_y: 0.0,
                fee_side,
                new_state: *self,
                liquidity_growth: 0.0,
            });
        }
        let x = self.x + dx;
        let y = self.y + delta_y;
        let growth = self.w * (dx / self.x).ln_1p() + (1.0 - self.w) * (delta_y / self.y).ln_1p();
        let new_state = PoolState {
            x,
            y,
            w: self.w,
            gamma: self.gamma,
            ell: liquidity(x, y, self.w),
        };
        Ok(TradeResult {
            delta_x: dx,
            delta_y,
            fee_side,
            new_state,
            liquidity_growth: growth.max(0.0),
        })
    }

    /// Compares one sell of `dx` against `parts` equal sequential sells.
    /// Returns `(single Δy, summed Δy over the split)`.
    pub fn split_trade_penalty(&self, dx: f64, parts: usize) -> Result<(f64, f64)> {
        if parts < 2 {
            return domain(format!("split needs at least 2 parts, got {parts}"));
        }
        if !(dx > 0.0 && dx.is_finite()) {
            return domain(format!("split applies to a sell leg with dx > 0, got {dx}"));
        }
        let single = self.execute_trade(Leg::SellX { dx })?.delta_y;
        let piece = dx / parts as f64;
        let mut pool = *self;
        let mut total = 0.0;
        for _ in 0..parts {
            let r = pool.execute_trade(Leg::SellX { dx: piece })?;
            total += r.delta_y;
            pool = r.new_state;
        }
        Ok((single, total))
    }

    /// Log-wealth of the pool holdings valued at the pool price; with a
    /// reference price `s` also reports `d = ln((s x + y)/(P x + y))` and the
    /// mispricing `z = ln(s/P)`.
    pub fn lp_wealth(&self, s: Option<f64>) -> Result<WealthDecomposition> {
        let p = self.spot_price();
        let ln_ell = self.ell.ln();
        let w_ln_p = self.w * p.ln();
        let entropy = weight_entropy(self.w);
        let (d, z) = match s {
            None => (None, None),
            Some(s) => {
                if !(s > 0.0 && s.is_finite()) {
                    return domain(format!("reference price must be positive, got {s}"));
                }
                let d = ((s * self.x + self.y) / (p * self.x + self.y)).ln();
                (Some(d), Some((s / p).ln()))
            }
        };
        Ok(WealthDecomposition {
            ln_v: ln_ell + w_ln_p + entropy,
            ln_ell,
            w_ln_p,
            entropy,
            d,
            z,
        })
    }
}

fn liquidity(x: f64, y: f64, w: f64) -> f64 {
    (w * x.ln() + (1.0 - w) * y.ln()).exp()
}

/// Bounds `[ln(1 - w(1-γ)), ln(1 + w(1/γ - 1))]` on `d` when the reference
/// price lies inside the no-arbitrage band.
pub fn wealth_ratio_bounds(w: f64, gamma: f64) -> (f64, f64) {
    (
        (1.0 - w * (1.0 - gamma)).ln(),
        (1.0 + w * (1.0 / gamma - 1.0)).ln(),
    )
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn invariants_hold_after_trades(
            x in 1.0f64..1e4, y in 1.0f64..1e4, w in 0.05f64..0.95,
            gamma in 0.9f64..1.0, frac in -0.9f64..5.0,
        ) {
            let p = PoolState::new(x, y, w, gamma).unwrap();
            let r = p.execute_trade(Leg::from_delta_x(frac * x)).unwrap();
            let s = r.new_state;
            // ℓ matches the reserves.
            let ell = (w * s.x().ln() + (1.0 - w) * s.y().ln()).exp();
            prop_assert!((s.ell() - ell).abs() <= 1e-12 * ell);
            // Constant wealth proportion.
            let lhs = s.spot_price() * s.x() / w;
            let rhs = s.y() / (1.0 - w);
            prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs);
            // Opposite signs and growing liquidity.
            if frac != 0.0 {
                prop_assert!(r.delta_x * r.delta_y < 0.0);
                prop_assert!(r.liquidity_growth > 0.0);
                prop_assert!(s.ell() > p.ell());
            }
        }
    }
}
