use serde::Serialize;

use super::prime::{first_primes, prime_distance, prime_ratio};

/// One prime's entry in the location table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrimeTap {
    pub prime: u64,
    /// `r(p)` as `"num/den"`.
    pub ratio: String,
    /// Exact distance `B log2 r(p)` in bins.
    pub distance: f64,
    /// Nearest integer bin.
    pub location: i64,
}

/// Sorted tap positions of a prime-dilated filter.
///
/// Primes whose distances round to the same bin share one tap, so the
/// number of taps can be smaller than `l + 1` (or `2l + 1`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DilatedLocations {
    pub bins_per_octave: usize,
    pub l: usize,
    pub symmetric: bool,
    pub locations: Vec<i64>,
    pub taps: Vec<PrimeTap>,
}

/// `argmin_k |k - x|` over integers, exact halves rounding down.
pub fn nearest_bin(x: f64) -> i64 {
    let lo = x.floor();
    if x - lo <= lo + 1.0 - x {
        lo as i64
    } else {
        lo as i64 + 1
    }
}

pub fn dilated_locations(bins_per_octave: usize, l: usize, symmetric: bool) -> DilatedLocations {
    assert!(bins_per_octave >= 1 && l >= 1, "B and l must be positive");
    let taps: Vec<PrimeTap> = first_primes(l)
        .into_iter()
        .map(|p| {
            let r = prime_ratio(p).expect("first_primes yields primes");
            let distance = prime_distance(p, bins_per_octave);
            PrimeTap {
                prime: p,
                ratio: format!("{}/{}", r.numer(), r.denom()),
                distance,
                location: nearest_bin(distance),
            }
        })
        .collect();
    let mut locations: Vec<i64> = std::iter::once(0).chain(taps.iter().map(|t| t.location)).collect();
    if symmetric {
        let mirrored: Vec<i64> = locations.iter().map(|k| -k).collect();
        locations.extend(mirrored);
    }
    locations.sort_unstable();
    locations.dedup();
    DilatedLocations {
        bins_per_octave,
        l,
        symmetric,
        locations,
        taps,
    }
}

impl DilatedLocations {
    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    /// `B + 1` for the asymmetric filter, `2B + 1` for the symmetric one.
    pub fn receptive_field(&self) -> usize {
        if self.symmetric {
            2 * self.bins_per_octave + 1
        } else {
            self.bins_per_octave + 1
        }
    }

    /// Dense index of tap offset `k`.
    pub fn dense_index(&self, k: i64) -> usize {
        let origin = if self.symmetric {
            self.bins_per_octave as i64
        } else {
            0
        };
        (k + origin) as usize
    }
}

/// Place `v[j]` at `locations[j]` in a dense filter of the receptive-field
/// length, zeros elsewhere.
pub fn expand_filter(v: &[f64], locs: &DilatedLocations) -> crate::Result<Vec<f64>> {
    if v.len() != locs.len() {
        return Err(crate::Error::shape("pdc filter weights", &[locs.len()], &[v.len()]));
    }
    let mut w = vec![0.0; locs.receptive_field()];
    for (&k, &value) in locs.locations.iter().zip(v) {
        w[locs.dense_index(k)] = value;
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exhaustive search over every candidate bin.
    fn brute_location(x: f64, b: usize) -> i64 {
        (0..=b as i64)
            .min_by(|&a, &c| (a as f64 - x).abs().total_cmp(&(c as f64 - x).abs()))
            .unwrap()
    }

    #[test]
    fn figure_configuration() {
        let locs = dilated_locations(12, 4, false);
        assert_eq!(locs.locations, vec![0, 4, 7, 10, 12]);
        let d: Vec<f64> = locs.taps.iter().map(|t| t.distance).collect();
        let expected = [12.0, 7.019_550_008_653_874, 3.863_137_138_648_348, 9.688_259_064_691_249];
        for (a, b) in d.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        for t in &locs.taps {
            assert_eq!(t.location, brute_location(t.distance, 12));
        }
        assert_eq!(dilated_locations(12, 1, false).locations, vec![0, 12]);
        assert_eq!(
            dilated_locations(12, 4, true).locations,
            vec![-12, -10, -7, -4, 0, 4, 7, 10, 12]
        );
    }

    #[test]
    fn colliding_primes_share_a_tap() {
        // 11 and 23 both land on bin 6 for B = 12.
        let locs = dilated_locations(12, 9, false);
        let six: Vec<u64> = locs.taps.iter().filter(|t| t.location == 6).map(|t| t.prime).collect();
        assert_eq!(six, vec![11, 23]);
        assert_eq!(locs.len(), locs.locations.len());
        assert!(locs.len() < 10);
    }

    #[test]
    fn expansion() {
        let locs = dilated_locations(12, 4, false);
        let w = expand_filter(&[1.0; 5], &locs).unwrap();
        assert_eq!(w, vec![1., 0., 0., 0., 1., 0., 0., 1., 0., 0., 1., 0., 1.]);
        assert!(expand_filter(&[0.0; 5], &locs).unwrap().iter().all(|&x| x == 0.0));
        assert!(expand_filter(&[1.0; 4], &locs).is_err());

        let sym = dilated_locations(12, 4, true);
        let v = [5.0, 4.0, 3.0, 2.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let w = expand_filter(&v, &sym).unwrap();
        assert_eq!(w.len(), 25);
        let mut rev = w.clone();
        rev.reverse();
        assert_eq!(w, rev);
    }

    #[test]
    fn ties_round_down() {
        assert_eq!(nearest_bin(2.5), 2);
        assert_eq!(nearest_bin(2.5000001), 3);
        assert_eq!(nearest_bin(0.2), 0);
    }
}
