//! Calendar time points, half-open intervals, and the compilation of
//! temporal relation and property predicates into numeric constraints.
//!
//! Time points live on an hour axis: a ground `ts(Y,M,D,H)` maps to the
//! number of hours since 0000-03-01 00:00 in the proleptic Gregorian
//! calendar. Interval relations then become linear comparisons between
//! endpoint indices, with day boundaries expressed as `mod 24` residues.

use std::fmt;
use thiserror::Error;

/// One component of a calendar tuple: a concrete integer or a named
/// constraint variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Component {
    Const(i64),
    Var(String),
}

/// A point on the time axis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TimePoint {
    MinusInfinity,
    PlusInfinity,
    Finite {
        year: Component,
        month: Component,
        day: Component,
        hour: Component,
    },
}

impl TimePoint {
    pub fn ground(year: i64, month: i64, day: i64, hour: i64) -> TimePoint {
        TimePoint::Finite {
            year: Component::Const(year),
            month: Component::Const(month),
            day: Component::Const(day),
            hour: Component::Const(hour),
        }
    }

    pub fn as_ground(&self) -> Option<(i64, i64, i64, i64)> {
        if let TimePoint::Finite { year, month, day, hour } = self {
            if let (Component::Const(y), Component::Const(m), Component::Const(d), Component::Const(h)) =
                (year, month, day, hour)
            {
                return Some((*y, *m, *d, *h));
            }
        }
        None
    }
}

/// Half-open interval `[start, end)`; well-formed only when `start < end`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interval {
    pub start: TimePoint,
    pub end: TimePoint,
}

/// The closed set of interval relations the theory can express.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemporalRelation {
    Overlap,
    Within,
    Before,
    Meets,
    After,
    NotBefore,
}

impl TemporalRelation {
    pub fn from_name(name: &str) -> Option<TemporalRelation> {
        Some(match name {
            "overlap" => TemporalRelation::Overlap,
            "within" => TemporalRelation::Within,
            "before" => TemporalRelation::Before,
            "meets" => TemporalRelation::Meets,
            "after" => TemporalRelation::After,
            "not_before" => TemporalRelation::NotBefore,
            _ => return None,
        })
    }
}

impl fmt::Display for TemporalRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            TemporalRelation::Overlap => "overlap",
            TemporalRelation::Within => "within",
            TemporalRelation::Before => "before",
            TemporalRelation::Meets => "meets",
            TemporalRelation::After => "after",
            TemporalRelation::NotBefore => "not_before",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TemporalError {
    #[error("unknown interval property `{0}`")]
    UnknownProperty(String),
    #[error("time point is not a ground finite calendar tuple")]
    NotGround,
    #[error("invalid calendar tuple ts({0},{1},{2},{3})")]
    InvalidDate(i64, i64, i64, i64),
}

pub fn is_leap_year(year: i64) -> bool {
    year % 4 == 0 && (year % 100 != 0 || year % 400 == 0)
}

pub fn days_in_month(year: i64, month: i64) -> i64 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 => {
            if is_leap_year(year) {
                29
            } else {
                28
            }
        }
        _ => 0,
    }
}

pub fn valid_date(year: i64, month: i64, day: i64, hour: i64) -> bool {
    (1..=12).contains(&month) && day >= 1 && day <= days_in_month(year, month) && (0..=23).contains(&hour)
}

/// Days since 0000-03-01 of a proleptic Gregorian civil date.
fn days_from_civil(y: i64, m: i64, d: i64) -> i64 {
    let y = if m <= 2 { y - 1 } else { y };
    let era = if y >= 0 { y } else { y - 399 } / 400;
    let yoe = y - era * 400;
    let mp = (m + 9) % 12;
    let doy = (153 * mp + 2) / 5 + d - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146097 + doe
}

fn civil_from_days(z: i64) -> (i64, i64, i64) {
    let era = if z >= 0 { z } else { z - 146096 } / 146097;
    let doe = z - era * 146097;
    let yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    let y = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = doy - (153 * mp + 2) / 5 + 1;
    let m = (mp + 2) % 12 + 1;
    let y = if m <= 2 { y + 1 } else { y };
    (y, m, d)
}

/// Hour-axis index of a ground calendar tuple.
pub fn hour_index(year: i64, month: i64, day: i64, hour: i64) -> i64 {
    days_from_civil(year, month, day) * 24 + hour
}

/// Inverse of [`hour_index`].
pub fn from_hour_index(idx: i64) -> (i64, i64, i64, i64) {
    let day = idx.div_euclid(24);
    let hour = idx.rem_euclid(24);
    let (y, m, d) = civil_from_days(day);
    (y, m, d, hour)
}

/// Midnight of the calendar day following `p`.
pub fn next_day(p: &TimePoint) -> Result<TimePoint, TemporalError> {
    let (y, m, d, h) = p.as_ground().ok_or(TemporalError::NotGround)?;
    if !valid_date(y, m, d, h) {
        return Err(TemporalError::InvalidDate(y, m, d, h));
    }
    let idx = hour_index(y, m, d, 0) + 24;
    let (ny, nm, nd, nh) = from_hour_index(idx);
    Ok(TimePoint::ground(ny, nm, nd, nh))
}

/// A primitive numeric constraint over hour-index expressions, generic in
/// the variable handle so the domain layer stays independent of any
/// particular store.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NumConstraint<V> {
    /// a <= b
    Le(V, V),
    /// a < b
    Lt(V, V),
    /// a = b
    Eq(V, V),
    /// b = a + offset
    OffsetEq(V, V, i64),
    /// a ≡ residue (mod 24)
    ModEq(V, i64),
    /// a must denote a finite calendar point
    Finite(V),
}

/// Endpoint handles of a half-open interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntervalEnds<V> {
    pub start: V,
    pub end: V,
}

/// Compiles a relation between two half-open intervals `[a,b)` and `[c,d)`
/// into endpoint constraints:
/// before: b <= c; meets: b = c; within: c <= a and b <= d;
/// overlap: a < d and c < b; after(i1,i2) = before(i2,i1);
/// not_before: c < b.
pub fn compile_relation<V: Copy>(
    tag: TemporalRelation,
    i1: IntervalEnds<V>,
    i2: IntervalEnds<V>,
) -> Vec<NumConstraint<V>> {
    let (a, b, c, d) = (i1.start, i1.end, i2.start, i2.end);
    match tag {
        TemporalRelation::Before => vec![NumConstraint::Le(b, c)],
        TemporalRelation::Meets => vec![NumConstraint::Eq(b, c)],
        TemporalRelation::Within => vec![NumConstraint::Le(c, a), NumConstraint::Le(b, d)],
        TemporalRelation::Overlap => vec![NumConstraint::Lt(a, d), NumConstraint::Lt(c, b)],
        TemporalRelation::After => vec![NumConstraint::Le(d, a)],
        TemporalRelation::NotBefore => vec![NumConstraint::Lt(c, b)],
    }
}

/// Compiles a unary interval property: `day_a` pins a whole calendar day,
/// `hour` and `point` pin a single hour, `bounded` requires finite
/// endpoints.
pub fn compile_property<V: Copy>(
    name: &str,
    i: IntervalEnds<V>,
) -> Result<Vec<NumConstraint<V>>, TemporalError> {
    let (a, b) = (i.start, i.end);
    Ok(match name {
        "day_a" => vec![NumConstraint::ModEq(a, 0), NumConstraint::OffsetEq(a, b, 24)],
        "hour" | "point" => vec![NumConstraint::OffsetEq(a, b, 1)],
        "bounded" => vec![NumConstraint::Finite(a), NumConstraint::Finite(b)],
        other => return Err(TemporalError::UnknownProperty(other.to_string())),
    })
}

/// The interval starts at hour `n` of some day (0 <= n <= 23).
pub fn compile_hour_of_day<V: Copy>(i: IntervalEnds<V>, n: i64) -> Vec<NumConstraint<V>> {
    vec![NumConstraint::ModEq(i.start, n.rem_euclid(24))]
}

/// Ground evaluation of a relation between two half-open index intervals.
/// Used by the model verifier; kept separate from the constraint route.
pub fn eval_relation_ground(tag: TemporalRelation, i1: (i64, i64), i2: (i64, i64)) -> bool {
    let (a, b) = i1;
    let (c, d) = i2;
    match tag {
        TemporalRelation::Before => b <= c,
        TemporalRelation::Meets => b == c,
        TemporalRelation::Within => c <= a && b <= d,
        TemporalRelation::Overlap => a < d && c < b,
        TemporalRelation::After => d <= a,
        TemporalRelation::NotBefore => c < b,
    }
}

/// Ground evaluation of an interval property on index endpoints.
pub fn eval_property_ground(name: &str, i: (i64, i64)) -> Result<bool, TemporalError> {
    let (a, b) = i;
    Ok(match name {
        "day_a" => a.rem_euclid(24) == 0 && b == a + 24,
        "hour" | "point" => b == a + 1,
        "bounded" => true, // ground index endpoints are finite by construction
        other => return Err(TemporalError::UnknownProperty(other.to_string())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn next_day_simple() {
        assert_eq!(
            next_day(&TimePoint::ground(1999, 1, 1, 0)).unwrap(),
            TimePoint::ground(1999, 1, 2, 0)
        );
    }

    #[test]
    fn next_day_year_boundary() {
        assert_eq!(
            next_day(&TimePoint::ground(1999, 12, 31, 5)).unwrap(),
            TimePoint::ground(2000, 1, 1, 0)
        );
    }

    #[test]
    fn next_day_leap_year() {
        assert_eq!(
            next_day(&TimePoint::ground(2000, 2, 28, 0)).unwrap(),
            TimePoint::ground(2000, 2, 29, 0)
        );
        assert_eq!(
            next_day(&TimePoint::ground(1900, 2, 28, 0)).unwrap(),
            TimePoint::ground(1900, 3, 1, 0)
        );
    }

    #[test]
    fn next_day_rejects_non_ground() {
        assert_eq!(next_day(&TimePoint::PlusInfinity), Err(TemporalError::NotGround));
        let p = TimePoint::Finite {
            year: Component::Const(1999),
            month: Component::Const(1),
            day: Component::Var("D".into()),
            hour: Component::Const(0),
        };
        assert_eq!(next_day(&p), Err(TemporalError::NotGround));
    }

    #[test]
    fn hour_index_round_trip() {
        for &(y, m, d, h) in &[
            (1999, 1, 1, 0),
            (2000, 2, 29, 23),
            (1970, 1, 1, 0),
            (1, 12, 31, 11),
            (2100, 3, 1, 7),
        ] {
            let idx = hour_index(y, m, d, h);
            assert_eq!(from_hour_index(idx), (y, m, d, h));
        }
    }

    #[test]
    fn day_a_examples() {
        // the whole of May the 21st 1976
        let a = hour_index(1976, 5, 21, 0);
        let b = hour_index(1976, 5, 22, 0);
        assert!(eval_property_ground("day_a", (a, b)).unwrap());
        // month boundary
        let a = hour_index(1999, 1, 31, 0);
        let b = hour_index(1999, 2, 1, 0);
        assert!(eval_property_ground("day_a", (a, b)).unwrap());
    }

    #[test]
    fn hour_example() {
        let a = hour_index(2000, 5, 22, 0);
        let b = hour_index(2000, 5, 22, 1);
        assert!(eval_property_ground("hour", (a, b)).unwrap());
    }

    #[test]
    fn meets_on_consecutive_days() {
        let jan1 = hour_index(1999, 1, 1, 0);
        let jan2 = hour_index(1999, 1, 2, 0);
        let jan3 = hour_index(1999, 1, 3, 0);
        assert!(eval_relation_ground(TemporalRelation::Meets, (jan1, jan2), (jan2, jan3)));
    }

    #[test]
    fn within_is_reflexive() {
        let i = (hour_index(1999, 1, 1, 0), hour_index(1999, 1, 2, 0));
        assert!(eval_relation_ground(TemporalRelation::Within, i, i));
    }

    #[test]
    fn unknown_property_is_an_error() {
        assert!(compile_property::<u32>("sideways", IntervalEnds { start: 0, end: 1 }).is_err());
    }

    /// Set semantics of a relation on explicit point sets; the independent
    /// oracle for the compiled endpoint arithmetic.
    fn set_semantics(tag: TemporalRelation, i1: (i64, i64), i2: (i64, i64)) -> bool {
        let points = |i: (i64, i64)| (i.0..i.1).collect::<std::collections::BTreeSet<i64>>();
        let (p1, p2) = (points(i1), points(i2));
        match tag {
            TemporalRelation::Overlap => p1.intersection(&p2).next().is_some(),
            TemporalRelation::Within => p1.is_subset(&p2),
            TemporalRelation::Before => p1.iter().all(|x| p2.iter().all(|y| x < y)),
            TemporalRelation::Meets => {
                // immediately precedes: disjoint, ordered, contiguous union
                p1.iter().all(|x| p2.iter().all(|y| x < y))
                    && p1.iter().max().unwrap() + 1 == *p2.iter().min().unwrap()
            }
            TemporalRelation::After => p2.iter().all(|y| p1.iter().all(|x| y < x)),
            TemporalRelation::NotBefore => !p1.iter().all(|x| p2.iter().all(|y| x < y)),
        }
    }

    #[test]
    fn relations_match_set_semantics_on_grid() {
        let tags = [
            TemporalRelation::Overlap,
            TemporalRelation::Within,
            TemporalRelation::Before,
            TemporalRelation::Meets,
            TemporalRelation::After,
            TemporalRelation::NotBefore,
        ];
        for a in 0..6 {
            for b in (a + 1)..6 {
                for c in 0..6 {
                    for d in (c + 1)..6 {
                        for &tag in &tags {
                            assert_eq!(
                                eval_relation_ground(tag, (a, b), (c, d)),
                                set_semantics(tag, (a, b), (c, d)),
                                "{tag} on [{a},{b}) [{c},{d})"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn relation_implications_on_grid() {
        for a in 0..6 {
            for b in (a + 1)..6 {
                for c in 0..6 {
                    for d in (c + 1)..6 {
                        let i1 = (a, b);
                        let i2 = (c, d);
                        if eval_relation_ground(TemporalRelation::Within, i1, i2) {
                            assert!(eval_relation_ground(TemporalRelation::Overlap, i1, i2));
                        }
                        if eval_relation_ground(TemporalRelation::Meets, i1, i2) {
                            assert!(eval_relation_ground(TemporalRelation::Before, i1, i2));
                        }
                        if eval_relation_ground(TemporalRelation::Before, i1, i2) {
                            assert!(!eval_relation_ground(TemporalRelation::Overlap, i1, i2));
                        }
                        assert_eq!(
                            eval_relation_ground(TemporalRelation::NotBefore, i1, i2),
                            !eval_relation_ground(TemporalRelation::Before, i1, i2)
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn day_a_tiles_the_timeline() {
        let mut p = TimePoint::ground(1999, 12, 28, 0);
        for _ in 0..10 {
            let n = next_day(&p).unwrap();
            let (y1, m1, d1, h1) = p.as_ground().unwrap();
            let (y2, m2, d2, h2) = n.as_ground().unwrap();
            let a = hour_index(y1, m1, d1, h1);
            let b = hour_index(y2, m2, d2, h2);
            assert!(eval_property_ground("day_a", (a, b)).unwrap());
            assert!(b > a);
            p = n;
        }
    }
}
