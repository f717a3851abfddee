//! Reduced-precision floating-point emulation.
//!
//! Values of every format live in `f64` containers. "Computing in format f"
//! means rounding each operand or result with [`round_to`], which applies
//! IEEE round-to-nearest, ties-to-even with gradual underflow and overflow
//! to infinity.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Format {
    Binary64,
    Binary32,
    Binary16,
    BFloat16,
}

impl Format {
    pub const ALL: [Format; 4] = [
        Format::Binary64,
        Format::Binary32,
        Format::Binary16,
        Format::BFloat16,
    ];

    /// Significand bits including the implicit leading bit.
    pub const fn precision_bits(self) -> u32 {
        match self {
            Format::Binary64 => 53,
            Format::Binary32 => 24,
            Format::Binary16 => 11,
            Format::BFloat16 => 8,
        }
    }

    pub const fn exponent_bits(self) -> u32 {
        match self {
            Format::Binary64 => 11,
            Format::Binary32 => 8,
            Format::Binary16 => 5,
            Format::BFloat16 => 8,
        }
    }

    /// Exponent of the smallest normal number.
    pub const fn min_exponent(self) -> i32 {
        2 - (1 << (self.exponent_bits() - 1))
    }

    pub const fn max_exponent(self) -> i32 {
        (1 << (self.exponent_bits() - 1)) - 1
    }

    pub fn max_finite(self) -> f64 {
        match self {
            Format::Binary64 => f64::MAX,
            _ => {
                let p = self.precision_bits() as i32;
                (2.0 - pow2(1 - p)) * pow2(self.max_exponent())
            }
        }
    }

    pub fn min_normal(self) -> f64 {
        pow2(self.min_exponent())
    }

    pub const fn supports_subnormals(self) -> bool {
        true
    }

    /// `2^-p`.
    pub fn unit_roundoff(self) -> f64 {
        pow2(-(self.precision_bits() as i32))
    }

    /// True when every value of `self` is exactly representable in `other`.
    pub fn is_subset_of(self, other: Format) -> bool {
        self.precision_bits() <= other.precision_bits()
            && self.exponent_bits() <= other.exponent_bits()
    }

    /// The narrowest format containing both, if one contains the other.
    pub fn wider(self, other: Format) -> Format {
        if self.is_subset_of(other) {
            other
        } else if other.is_subset_of(self) {
            self
        } else {
            Format::Binary32
        }
    }

    pub fn cli_name(self) -> &'static str {
        match self {
            Format::Binary64 => "fp64",
            Format::Binary32 => "fp32",
            Format::Binary16 => "fp16",
            Format::BFloat16 => "bf16",
        }
    }

    #[inline]
    pub fn round(self, x: f64) -> f64 {
        round_to(x, self)
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.cli_name())
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fp64" | "binary64" | "f64" => Ok(Format::Binary64),
            "fp32" | "binary32" | "f32" => Ok(Format::Binary32),
            "fp16" | "binary16" | "f16" | "half" => Ok(Format::Binary16),
            "bf16" | "bfloat16" => Ok(Format::BFloat16),
            other => Err(format!("unknown format `{other}` (expected fp64, fp32, fp16, bf16)")),
        }
    }
}

#[inline]
fn pow2(e: i32) -> f64 {
    debug_assert!((-1022..=1023).contains(&e));
    f64::from_bits(((e + 1023) as u64) << 52)
}

/// Round to `p` significand bits with minimum exponent `emin`, saturating
/// to infinity above `max_finite`.
#[inline]
fn round_generic(x: f64, p: i32, emin: i32, max_finite: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let biased = ((x.to_bits() >> 52) & 0x7ff) as i32;
    let exp = (biased - 1023).max(emin);
    // Division by a power of two is exact and leaves at most p integer bits.
    let quantum = pow2(exp - p + 1);
    let r = (x / quantum).round_ties_even() * quantum;
    if r.abs() > max_finite {
        f64::INFINITY.copysign(x)
    } else {
        r
    }
}

const F16_MAX: f64 = 65504.0;
const BF16_MAX: f64 = 3.389_531_389_251_535_5e38;

/// Nearest value of `fmt` to `x`, ties to even.
#[inline]
pub fn round_to(x: f64, fmt: Format) -> f64 {
    match fmt {
        Format::Binary64 => x,
        Format::Binary32 => x as f32 as f64,
        Format::Binary16 => round_generic(x, 11, -14, F16_MAX),
        Format::BFloat16 => round_generic(x, 8, -126, BF16_MAX),
    }
}

pub fn unit_roundoff(fmt: Format) -> f64 {
    fmt.unit_roundoff()
}

/// True iff `x` rounds to a finite value of `fmt`.
pub fn fits(x: f64, fmt: Format) -> bool {
    round_to(x, fmt).is_finite()
}

/// Compile-time rounding mode, so hot loops monomorphize instead of
/// branching on the format per element.
pub(crate) trait Rounding: Copy + Send + Sync + 'static {
    const FORMAT: Format;
    fn round(x: f64) -> f64;
}

#[derive(Clone, Copy)]
pub(crate) struct Exact;
#[derive(Clone, Copy)]
pub(crate) struct Single;
#[derive(Clone, Copy)]
pub(crate) struct Half;
#[derive(Clone, Copy)]
pub(crate) struct Brain;

impl Rounding for Exact {
    const FORMAT: Format = Format::Binary64;
    #[inline(always)]
    fn round(x: f64) -> f64 {
        x
    }
}

impl Rounding for Single {
    const FORMAT: Format = Format::Binary32;
    #[inline(always)]
    fn round(x: f64) -> f64 {
        x as f32 as f64
    }
}

impl Rounding for Half {
    const FORMAT: Format = Format::Binary16;
    #[inline(always)]
    fn round(x: f64) -> f64 {
        round_generic(x, 11, -14, F16_MAX)
    }
}

impl Rounding for Brain {
    const FORMAT: Format = Format::BFloat16;
    #[inline(always)]
    fn round(x: f64) -> f64 {
        round_generic(x, 8, -126, BF16_MAX)
    }
}

/// Expand `$body` with `$R` bound to the [`Rounding`] type for `$fmt`.
macro_rules! with_rounding {
    ($fmt:expr, $R:ident => $body:expr) => {
        match $fmt {
            $crate::precision::Format::Binary64 => {
                type $R = $crate::precision::Exact;
                $body
            }
            $crate::precision::Format::Binary32 => {
                type $R = $crate::precision::Single;
                $body
            }
            $crate::precision::Format::Binary16 => {
                type $R = $crate::precision::Half;
                $body
            }
            $crate::precision::Format::BFloat16 => {
                type $R = $crate::precision::Brain;
                $body
            }
        }
    };
}
pub(crate) use with_rounding;
