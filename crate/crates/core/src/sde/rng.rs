//! Philox4x32-10 counter-based generator and keyed standard normals.

const M0: u32 = 0xD251_1F53;
const M1: u32 = 0xCD9E_8D57;
const W0: u32 = 0x9E37_79B9;
const W1: u32 = 0xBB67_AE85;

#[inline]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = u64::from(a) * u64::from(b);
    (p as u32, (p >> 32) as u32)
}

#[inline]
fn round(c: [u32; 4], k: [u32; 2]) -> [u32; 4] {
    let (lo0, hi0) = mulhilo(M0, c[0]);
    let (lo1, hi1) = mulhilo(M1, c[2]);
    [hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0]
}

/// One Philox4x32 block with ten rounds.
pub fn philox4x32_10(mut ctr: [u32; 4], mut key: [u32; 2]) -> [u32; 4] {
    for r in 0..10 {
        if r > 0 {
            key[0] = key[0].wrapping_add(W0);
            key[1] = key[1].wrapping_add(W1);
        }
        ctr = round(ctr, key);
    }
    ctr
}

/// Address of one standard normal draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NormalKey {
    pub seed: u64,
    pub path: u64,
    pub level: u8,
    pub step: u64,
    pub component: u16,
    pub stream: u8,
}

#[inline]
fn unit(hi: u32, lo: u32) -> f64 {
    let bits = ((u64::from(hi) << 32) | u64::from(lo)) >> 11;
    (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal for `key`, by Box-Muller on one Philox block. Components
/// `2i` and `2i + 1` share a block.
pub fn normal(key: NormalKey) -> f64 {
    assert!(key.step < 1 << 32, "step index exceeds 32 bits");
    let pair = key.component / 2;
    let ctr = [
        key.step as u32,
        key.path as u32,
        u32::from(key.level) | (u32::from(key.stream) << 8) | (u32::from(pair) << 16),
        (key.path >> 32) as u32,
    ];
    let r = philox4x32_10(ctr, [key.seed as u32, (key.seed >> 32) as u32]);
    let u1 = unit(r[0], r[1]);
    let u2 = unit(r[2], r[3]);
    let rad = (-2.0 * u1.ln()).sqrt();
    let ang = std::f64::consts::TAU * u2;
    if key.component % 2 == 0 {
        rad * ang.cos()
    } else {
        rad * ang.sin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_answers() {
        assert_eq!(
            philox4x32_10([0; 4], [0; 2]),
            [0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8]
        );
        assert_eq!(
            philox4x32_10([u32::MAX; 4], [u32::MAX; 2]),
            [0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd]
        );
        assert_eq!(
            philox4x32_10(
                [0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344],
                [0xa4093822, 0x299f31d0]
            ),
            [0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1]
        );
    }

    fn key(step: u64, component: u16) -> NormalKey {
        NormalKey {
            seed: 7,
            path: 3,
            level: 0,
            step,
            component,
            stream: 0,
        }
    }

    #[test]
    fn normals_have_unit_moments() {
        let n = 200_000u64;
        let (mut s1, mut s2) = (0.0, 0.0);
        for i in 0..n {
            let z = normal(key(i / 2, (i % 2) as u16));
            s1 += z;
            s2 += z * z;
        }
        let mean = s1 / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt(), "{mean}");
        assert!((var - 1.0).abs() < 4.0 * (2.0 / n as f64).sqrt(), "{var}");
    }

    #[test]
    fn keys_are_independent_streams() {
        let a = normal(key(5, 0));
        assert_eq!(a, normal(key(5, 0)));
        assert_ne!(a, normal(key(5, 1)));
        assert_ne!(a, normal(key(6, 0)));
        assert_ne!(
            a,
            normal(NormalKey {
                stream: 1,
                ..key(5, 0)
            })
        );
        assert_ne!(
            a,
            normal(NormalKey {
                level: 1,
                ..key(5, 0)
            })
        );
        assert_ne!(
            a,
            normal(NormalKey {
                seed: 8,
                ..key(5, 0)
            })
        );
    }
}
