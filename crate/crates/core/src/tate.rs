//! Tate's algorithm over the integers.
//!
//! Used at the primes 2 and 3, where the short model `y^2 = x^3 + Ax + B`
//! need not be minimal and the reduction type cannot be read off
//! `gcd(A, B)`. The control flow follows the classical presentation (Cohen,
//! Algorithm 7.5.1) with integral coordinate changes.

use crate::arith::{inv_mod, valuation_opt};

/// Integral Weierstrass model `y^2 + a1 xy + a3 y = x^3 + a2 x^2 + a4 x + a6`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Model {
    pub a1: i128,
    pub a2: i128,
    pub a3: i128,
    pub a4: i128,
    pub a6: i128,
}

impl Model {
    pub fn short(a: i64, b: i64) -> Self {
        Model { a1: 0, a2: 0, a3: 0, a4: a as i128, a6: b as i128 }
    }

    pub fn b_invariants(&self) -> [i128; 4] {
        let Model { a1, a2, a3, a4, a6 } = *self;
        let b2 = a1 * a1 + 4 * a2;
        let b4 = a1 * a3 + 2 * a4;
        let b6 = a3 * a3 + 4 * a6;
        let b8 = a1 * a1 * a6 + 4 * a2 * a6 - a1 * a3 * a4 + a2 * a3 * a3 - a4 * a4;
        [b2, b4, b6, b8]
    }

    pub fn c_invariants(&self) -> [i128; 2] {
        let [b2, b4, b6, _] = self.b_invariants();
        [b2 * b2 - 24 * b4, -b2 * b2 * b2 + 36 * b2 * b4 - 216 * b6]
    }

    pub fn discriminant(&self) -> i128 {
        let [b2, b4, b6, b8] = self.b_invariants();
        -b2 * b2 * b8 - 8 * b4 * b4 * b4 - 27 * b6 * b6 + 9 * b2 * b4 * b6
    }

    /// Substitution `x = x' + r`, `y = y' + s x' + t`.
    pub fn rst(&self, r: i128, s: i128, t: i128) -> Self {
        let Model { a1, a2, a3, a4, a6 } = *self;
        Model {
            a1: a1 + 2 * s,
            a2: a2 - s * a1 + 3 * r - s * s,
            a3: a3 + r * a1 + 2 * t,
            a4: a4 - s * a3 + 2 * r * a2 - (t + r * s) * a1 + 3 * r * r - 2 * s * t,
            a6: a6 + r * a4 + r * r * a2 + r * r * r - t * a3 - t * t - r * t * a1,
        }
    }

    /// Divides `a_i` by `u^i`; the caller guarantees divisibility.
    fn scale_down(&self, u: i128) -> Self {
        let u2 = u * u;
        let u3 = u2 * u;
        debug_assert!(self.a1 % u == 0 && self.a2 % u2 == 0 && self.a3 % u3 == 0);
        debug_assert!(self.a4 % (u2 * u2) == 0 && self.a6 % (u3 * u3) == 0);
        Model {
            a1: self.a1 / u,
            a2: self.a2 / u2,
            a3: self.a3 / u3,
            a4: self.a4 / (u2 * u2),
            a6: self.a6 / (u3 * u3),
        }
    }
}

/// Kodaira symbol of the special fibre.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kodaira {
    I0,
    In(u32),
    II,
    III,
    IV,
    I0Star,
    InStar(u32),
    IVStar,
    IIIStar,
    IIStar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TateOutput {
    pub kodaira: Kodaira,
    pub conductor_exponent: u32,
    pub tamagawa: u32,
    /// Valuation of the minimal discriminant at `p`.
    pub minimal_disc_valuation: u32,
}

struct Ctx {
    p: i128,
}

impl Ctx {
    fn div(&self, x: i128, k: u32) -> bool {
        x % self.p.pow(k) == 0
    }

    fn reduce(&self, x: i128) -> i128 {
        x.rem_euclid(self.p)
    }

    fn inv(&self, x: i128) -> i128 {
        inv_mod(self.reduce(x) as u64, self.p as u64) as i128
    }

    /// Solves `T^p = x mod p`; Frobenius is the identity on F_p.
    fn root(&self, x: i128) -> i128 {
        self.reduce(x)
    }

    fn quad_roots(&self, a: i128, b: i128, c: i128) -> bool {
        let (a, b, c) = (self.reduce(a), self.reduce(b), self.reduce(c));
        (0..self.p).any(|x| (a * x * x + b * x + c) % self.p == 0)
    }

    fn cubic_root_count(&self, b: i128, c: i128, d: i128) -> u32 {
        let (b, c, d) = (self.reduce(b), self.reduce(c), self.reduce(d));
        (0..self.p)
            .filter(|&x| (((x + b) * x + c) % self.p * x + d) % self.p == 0)
            .count() as u32
    }
}

/// Runs Tate's algorithm on an integral model at the prime `p`.
///
/// Intended for small primes; residue searches are exhaustive over `F_p`.
pub fn tate(model: Model, p: u64) -> TateOutput {
    assert!((2..1 << 20).contains(&p), "tate: unsupported prime {p}");
    let ctx = Ctx { p: p as i128 };
    let pi = ctx.p;
    let (pi2, pi3, pi4) = (pi * pi, pi * pi * pi, pi * pi * pi * pi);
    let half = if p == 2 { 0 } else { ctx.inv(2) };
    let mut c = model;

    loop {
        let delta = c.discriminant();
        let v_delta = valuation_opt(delta, p).expect("singular model passed to tate");
        if v_delta == 0 {
            return TateOutput {
                kodaira: Kodaira::I0,
                conductor_exponent: 0,
                tamagawa: 1,
                minimal_disc_valuation: 0,
            };
        }
        let done = |kodaira, f: u32, cp| TateOutput {
            kodaira,
            conductor_exponent: f,
            tamagawa: cp,
            minimal_disc_valuation: v_delta,
        };

        // Move the singular point to (0, 0) so that p | a3, a4, a6.
        let [b2, b4, b6, _] = c.b_invariants();
        let [c4, c6] = c.c_invariants();
        let (r, t) = if p == 2 {
            if ctx.div(b2, 1) {
                let r = ctx.root(c.a4);
                (r, ctx.root(((r + c.a2) * r + c.a4) * r + c.a6))
            } else {
                let temp = ctx.inv(c.a1);
                let r = temp * c.a3;
                (r, temp * (c.a4 + r * r))
            }
        } else if p == 3 {
            let r = if ctx.div(b2, 1) { ctx.root(-b6) } else { -ctx.inv(b2) * b4 };
            (r, c.a1 * r + c.a3)
        } else {
            let r = if ctx.div(c4, 1) {
                -ctx.inv(12) * b2
            } else {
                -ctx.inv(12 * ctx.reduce(c4)) * ctx.reduce(c6 + b2 * c4)
            };
            let r = ctx.reduce(r);
            (r, -half * ctx.reduce(c.a1 * r + c.a3))
        };
        c = c.rst(ctx.reduce(r), 0, ctx.reduce(t));
        let [b2, _, b6, b8] = c.b_invariants();

        if !ctx.div(b2, 1) {
            let cp = if ctx.quad_roots(1, c.a1, -c.a2) {
                v_delta
            } else if v_delta % 2 == 0 {
                2
            } else {
                1
            };
            return done(Kodaira::In(v_delta), 1, cp);
        }
        if !ctx.div(c.a6, 2) {
            return done(Kodaira::II, v_delta, 1);
        }
        if !ctx.div(b8, 3) {
            return done(Kodaira::III, v_delta - 1, 2);
        }
        if !ctx.div(b6, 3) {
            let cp = if ctx.quad_roots(1, c.a3 / pi, -c.a6 / pi2) { 3 } else { 1 };
            return done(Kodaira::IV, v_delta - 2, cp);
        }

        // Arrange p | a1, a2; p^2 | a3, a4; p^3 | a6.
        let (s, t) = if p == 2 {
            (ctx.root(c.a2), pi * ctx.root(c.a6 / pi2))
        } else if p == 3 {
            (c.a1, c.a3)
        } else {
            (-c.a1 * half, -c.a3 * half)
        };
        c = c.rst(0, s, t);

        let b = c.a2 / pi;
        let cc = c.a4 / pi2;
        let d = c.a6 / pi3;
        let w = 27 * d * d - b * b * cc * cc + 4 * b * b * b * d - 18 * b * cc * d + 4 * cc * cc * cc;
        let x = 3 * cc - b * b;

        if !ctx.div(w, 1) {
            let cp = 1 + ctx.cubic_root_count(b, cc, d);
            return done(Kodaira::I0Star, v_delta - 4, cp);
        }

        if !ctx.div(x, 1) {
            // Double root: type I_m^*. Move the double root to T = 0.
            let r = if p == 2 {
                ctx.root(cc)
            } else if p == 3 {
                cc * ctx.inv(b)
            } else {
                (b * cc - 9 * d) * ctx.inv(2 * x)
            };
            c = c.rst(pi * ctx.reduce(r), 0, 0);
            let (mut ix, mut iy) = (3u32, 3u32);
            let (mut mx, mut my) = (pi2, pi2);
            let cp;
            loop {
                let a3t = c.a3 / my;
                let a6t = c.a6 / (mx * my);
                if ctx.div(a3t * a3t + 4 * a6t, 1) {
                    let t = if p == 2 {
                        my * ctx.root(a6t)
                    } else {
                        my * ctx.reduce(-a3t * half)
                    };
                    c = c.rst(0, 0, t);
                    my *= pi;
                    iy += 1;
                    let a2t = c.a2 / pi;
                    let a4t = c.a4 / (pi * mx);
                    let a6t = c.a6 / (mx * my);
                    if ctx.div(a4t * a4t - 4 * a6t * a2t, 1) {
                        let r = if p == 2 {
                            mx * ctx.root(a6t * ctx.inv(a2t))
                        } else {
                            mx * ctx.reduce(-a4t * ctx.inv(2 * a2t))
                        };
                        c = c.rst(r, 0, 0);
                        mx *= pi;
                        ix += 1;
                    } else {
                        cp = if ctx.quad_roots(a2t, a4t, a6t) { 4 } else { 2 };
                        break;
                    }
                } else {
                    cp = if ctx.quad_roots(1, a3t, -a6t) { 4 } else { 2 };
                    break;
                }
            }
            let m = ix + iy - 5;
            return done(Kodaira::InStar(m), v_delta - m - 4, cp);
        }

        // Triple root: move it to T = 0.
        let r = if p == 2 {
            b
        } else if p == 3 {
            ctx.root(-d)
        } else {
            -b * ctx.inv(3)
        };
        c = c.rst(pi * ctx.reduce(r), 0, 0);
        let x3 = c.a3 / pi2;
        let x6 = c.a6 / pi4;
        if !ctx.div(x3 * x3 + 4 * x6, 1) {
            let cp = if ctx.quad_roots(1, x3, -x6) { 3 } else { 1 };
            return done(Kodaira::IVStar, v_delta - 6, cp);
        }
        let t = if p == 2 {
            -pi2 * ctx.root(x6)
        } else {
            pi2 * ctx.reduce(-x3 * half)
        };
        c = c.rst(0, 0, t);
        if !ctx.div(c.a4, 4) {
            return done(Kodaira::IIIStar, v_delta - 7, 2);
        }
        if !ctx.div(c.a6, 6) {
            return done(Kodaira::IIStar, v_delta - 8, 1);
        }
        // Not minimal at p: rescale and start over.
        c = c.scale_down(pi);
    }
}
