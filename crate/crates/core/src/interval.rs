//! Closed real intervals with outward-rounded arithmetic.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "inverted interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    /// Widens by one ulp on each side so rounding in the operation that
    /// produced the bounds cannot exclude the true range.
    fn outward(lo: f64, hi: f64) -> Self {
        Interval {
            lo: lo.next_down(),
            hi: hi.next_up(),
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    pub fn scale(self, c: f64) -> Interval {
        if c >= 0.0 {
            Interval::outward(self.lo * c, self.hi * c)
        } else {
            Interval::outward(self.hi * c, self.lo * c)
        }
    }

    pub fn abs(self) -> Interval {
        if self.lo >= 0.0 {
            self
        } else if self.hi <= 0.0 {
            Interval::new(-self.hi, -self.lo)
        } else {
            Interval::new(0.0, self.mag())
        }
    }

    /// Range of `v |v|`, which is increasing in `v`.
    pub fn signed_square(self) -> Interval {
        Interval::outward(self.lo * self.lo.abs(), self.hi * self.hi.abs())
    }

    pub fn cos(self) -> Interval {
        (self + Interval::point(FRAC_PI_2)).sin()
    }

    pub fn sin(self) -> Interval {
        if !(self.width() < TAU) {
            return Interval::new(-1.0, 1.0);
        }
        let mut lo = self.lo.sin().min(self.hi.sin());
        let mut hi = self.lo.sin().max(self.hi.sin());
        // maxima at pi/2 + 2k pi, minima at -pi/2 + 2k pi
        let first_max = ((self.lo - FRAC_PI_2) / TAU).ceil();
        if FRAC_PI_2 + first_max * TAU <= self.hi {
            hi = 1.0;
        }
        let first_min = ((self.lo + FRAC_PI_2) / TAU).ceil();
        if -FRAC_PI_2 + first_min * TAU <= self.hi {
            lo = -1.0;
        }
        let out = Interval::outward(lo, hi);
        Interval::new(out.lo.max(-1.0), out.hi.min(1.0))
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, rhs: Interval) -> Interval {
        Interval::outward(self.lo + rhs.lo, self.hi + rhs.hi)
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, rhs: Interval) -> Interval {
        Interval::outward(self.lo - rhs.hi, self.hi - rhs.lo)
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval::new(-self.hi, -self.lo)
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, rhs: Interval) -> Interval {
        let c = [
            self.lo * rhs.lo,
            self.lo * rhs.hi,
            self.hi * rhs.lo,
            self.hi * rhs.hi,
        ];
        let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Interval::outward(lo, hi)
    }
}
