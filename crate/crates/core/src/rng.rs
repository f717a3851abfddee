//! Counter-based random numbers.
//!
//! Every draw is a pure function of `(seed, stream, i, j)`, so any matrix
//! entry can be produced without generating the ones before it. There is no
//! generator state to carry around, which keeps parallel fills trivially
//! reproducible.

/// Stream carrying the matrix entries.
pub const STREAM_MATRIX: u64 = 0;
/// Stream carrying the right-hand side.
pub const STREAM_RHS: u64 = 1;
/// Reserved for diagonal sign draws.
pub const STREAM_DIAG_SIGN: u64 = 2;

// Sub-stream tags for the two uniforms feeding Box-Muller. They occupy the
// top bits so they never collide with the small public stream ids.
const GAUSS_RADIUS_TAG: u64 = 1 << 62;
const GAUSS_ANGLE_TAG: u64 = 1 << 63;

const TWO_POW_NEG_53: f64 = 1.0 / (1u64 << 53) as f64;

/// Bijective 64-bit finalizer (the splitmix64 output function).
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    z
}

/// Address of a single draw.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub stream_id: u64,
    pub i: u64,
    pub j: u64,
}

impl StreamKey {
    pub fn new(seed: u64, stream_id: u64, i: u64, j: u64) -> Self {
        Self {
            seed,
            stream_id,
            i,
            j,
        }
    }
}

/// A `(seed, stream)` pair with its key schedule precomputed. Filling a
/// matrix through this costs one `mix64` per entry instead of three.
#[derive(Clone, Copy, Debug)]
pub struct Stream {
    key: u64,
}

impl Stream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self {
            key: mix64(seed ^ mix64(stream_id)),
        }
    }

    #[inline]
    pub fn bits(&self, i: u64, j: u64) -> u64 {
        mix64(self.key ^ ((i << 32).wrapping_add(j)))
    }

    /// Uniform draw in `[-1, 1)`.
    #[inline]
    pub fn uniform(&self, i: u64, j: u64) -> f64 {
        let u = (self.bits(i, j) >> 11) as f64 * TWO_POW_NEG_53;
        2.0 * u - 1.0
    }
}

#[inline]
fn unit_open_closed(bits: u64) -> f64 {
    let mantissa = bits >> 11;
    if mantissa == 0 {
        TWO_POW_NEG_53
    } else {
        mantissa as f64 * TWO_POW_NEG_53
    }
}

/// Uniform draw in `[-1, 1)`: top 53 bits of the mixed key, mapped affinely.
pub fn uniform_element(key: StreamKey) -> f64 {
    Stream::new(key.seed, key.stream_id).uniform(key.i, key.j)
}

/// Standard normal draw via Box-Muller on two uniforms taken from tagged
/// sub-streams at the same `(i, j)`.
pub fn gaussian_element(key: StreamKey) -> f64 {
    GaussianStream::new(key.seed, key.stream_id).sample(key.i, key.j)
}

#[derive(Clone, Copy, Debug)]
pub struct GaussianStream {
    radius: Stream,
    angle: Stream,
}

impl GaussianStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self {
            radius: Stream::new(seed, stream_id | GAUSS_RADIUS_TAG),
            angle: Stream::new(seed, stream_id | GAUSS_ANGLE_TAG),
        }
    }

    #[inline]
    pub fn sample(&self, i: u64, j: u64) -> f64 {
        // u1 in (0, 1] keeps the log finite; u2 only feeds the angle.
        let u1 = unit_open_closed(self.radius.bits(i, j));
        let u2 = (self.angle.bits(i, j) >> 11) as f64 * TWO_POW_NEG_53;
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}
