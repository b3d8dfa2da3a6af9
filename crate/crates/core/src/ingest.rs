//! Coverage instances from rating files and from a seeded generator.

use std::collections::{BTreeMap, HashMap};
use std::io::Read;
use std::path::Path;

use rand::Rng;

use crate::baselines::{enumerate_equilibria, is_equilibrium_with, TieRule};
use crate::error::{Error, Result};
use crate::objective::{delta_max, CoverageObjective, DeltaMaxMode, DeltaMaxOptions};
use crate::rng;

/// Accepted rating range (inclusive).
pub const RATING_RANGE: (f64, f64) = (0.5, 5.0);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rating {
    pub user: u64,
    pub movie: u64,
    pub rating: f64,
}

/// A row dropped during parsing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SkippedRow {
    pub line: u64,
    pub reason: String,
}

/// Parsed ratings with one record per `(user, movie)` pair, the last
/// occurrence winning, in first-seen order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RatingsTable {
    pub records: Vec<Rating>,
    pub skipped: Vec<SkippedRow>,
}

impl RatingsTable {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

pub fn load_ratings(path: impl AsRef<Path>) -> Result<RatingsTable> {
    let file = std::fs::File::open(path.as_ref())?;
    read_ratings(std::io::BufReader::new(file))
}

/// Reads `userId,movieId,rating[,timestamp]` with a header row. Extra
/// columns are ignored.
pub fn read_ratings<R: Read>(reader: R) -> Result<RatingsTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let (cu, cm, cr) = (column("userId")?, column("movieId")?, column("rating")?);

    let mut table = RatingsTable::default();
    let mut index: HashMap<(u64, u64), usize> = HashMap::new();
    for result in rdr.records() {
        let record = match result {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                table.skipped.push(SkippedRow {
                    line,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let line = record.position().map_or(0, |p| p.line());
        let parsed = (|| -> std::result::Result<Rating, String> {
            let field =
                |i: usize, what: &str| record.get(i).ok_or_else(|| format!("missing {what}"));
            let user = field(cu, "userId")?;
            let movie = field(cm, "movieId")?;
            let rating = field(cr, "rating")?;
            let user = user
                .parse()
                .map_err(|_| format!("invalid userId `{user}`"))?;
            let movie = movie
                .parse()
                .map_err(|_| format!("invalid movieId `{movie}`"))?;
            let value: f64 = rating
                .parse()
                .map_err(|_| format!("invalid rating `{rating}`"))?;
            if !(RATING_RANGE.0..=RATING_RANGE.1).contains(&value) {
                return Err(format!(
                    "rating {value} outside [{}, {}]",
                    RATING_RANGE.0, RATING_RANGE.1
                ));
            }
            Ok(Rating {
                user,
                movie,
                rating: value,
            })
        })();
        match parsed {
            Ok(r) => match index.get(&(r.user, r.movie)) {
                Some(&i) => table.records[i] = r,
                None => {
                    index.insert((r.user, r.movie), table.records.len());
                    table.records.push(r);
                }
            },
            Err(reason) => {
                log::warn!("skipping line {line}: {reason}");
                table.skipped.push(SkippedRow { line, reason });
            }
        }
    }
    if table.records.is_empty() {
        log::warn!("rating file holds no usable records");
    }
    if !table.skipped.is_empty() {
        log::warn!("skipped {} malformed rows", table.skipped.len());
    }
    Ok(table)
}

/// A coverage instance with the original ids behind its dense indices.
#[derive(Clone, Debug)]
pub struct CoverageBuild {
    pub objective: CoverageObjective,
    /// `movie_ids[s]` is the movie behind strategy `s`.
    pub movie_ids: Vec<u64>,
    /// `user_ids[u]` is the user behind dense id `u`.
    pub user_ids: Vec<u64>,
}

/// Strategies are the movies liked (`rating ≥ r_bar`) by at least
/// `min_likers` users, optionally the `top_n` most liked, in movie-id order.
/// The universe is every user liking a surviving movie.
pub fn build_coverage(
    table: &RatingsTable,
    agents: usize,
    r_bar: f64,
    min_likers: usize,
    top_n: Option<usize>,
) -> Result<CoverageBuild> {
    if !r_bar.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "like threshold {r_bar} is not finite"
        )));
    }
    let mut likers: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
    for r in table.records.iter().filter(|r| r.rating >= r_bar) {
        likers.entry(r.movie).or_default().push(r.user);
    }
    let mut movies: Vec<(u64, Vec<u64>)> = likers
        .into_iter()
        .filter(|(_, users)| users.len() >= min_likers.max(1))
        .collect();
    if let Some(n) = top_n {
        movies.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then(a.0.cmp(&b.0)));
        movies.truncate(n);
        movies.sort_by_key(|(m, _)| *m);
    }
    if movies.is_empty() {
        return Err(Error::NoSurvivingMovies);
    }

    let mut user_ids: Vec<u64> = movies.iter().flat_map(|(_, u)| u.iter().copied()).collect();
    user_ids.sort_unstable();
    user_ids.dedup();
    let dense: HashMap<u64, u32> = user_ids
        .iter()
        .enumerate()
        .map(|(i, &u)| (u, i as u32))
        .collect();
    let sets = movies
        .iter()
        .map(|(_, users)| users.iter().map(|u| dense[u]).collect())
        .collect();
    Ok(CoverageBuild {
        objective: CoverageObjective::new(agents, user_ids.len(), sets)?,
        movie_ids: movies.into_iter().map(|(m, _)| m).collect(),
        user_ids,
    })
}

/// Which tie structure a generated instance must avoid.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TieCheck {
    /// Accept anything.
    Off,
    /// Reject instances on which every agent is indifferent everywhere (`Δ^max = 0`).
    #[default]
    NonFlat,
    /// Reject instances where some agent has tied best responses against some
    /// context of real strategies.
    Distinguishable,
    /// Reject instances with an equilibrium at which some agent has a tied
    /// best response.
    StrictEquilibria,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SynthOptions {
    pub tie_check: TieCheck,
    pub max_retries: usize,
    /// Oracle-call budget of the tie check; larger instances are accepted unchecked.
    pub check_limit: u64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            tie_check: TieCheck::NonFlat,
            max_retries: 64,
            check_limit: crate::DEFAULT_ENUMERATION_LIMIT,
        }
    }
}

/// Random coverage instance: each of the `k` strategies contains each of the
/// `universe` users independently with probability `density`. Deterministic
/// in `seed`; rejected draws are replaced by the next attempt's stream.
pub fn synth_instance(
    agents: usize,
    k: usize,
    universe: usize,
    density: f64,
    seed: u64,
    opts: SynthOptions,
) -> Result<CoverageObjective> {
    if agents == 0 || k == 0 || universe == 0 {
        return Err(Error::InvalidConfig(
            "agents, strategies and universe must be positive".into(),
        ));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "density {density} outside (0, 1]"
        )));
    }
    for attempt in 0..opts.max_retries.max(1) {
        let mut r = rng::aux_stream(seed, attempt as u64);
        let sets: Vec<Vec<u32>> = (0..k)
            .map(|_| {
                (0..universe as u32)
                    .filter(|_| r.gen_bool(density))
                    .collect()
            })
            .collect();
        let objective = CoverageObjective::new(agents, universe, sets)?;
        if accepts(&objective, opts.tie_check, opts.check_limit)? {
            return Ok(objective);
        }
        log::debug!("synthetic draw {attempt} rejected by {:?}", opts.tie_check);
    }
    Err(Error::RetriesExhausted(opts.max_retries.max(1)))
}

fn accepts(objective: &CoverageObjective, check: TieCheck, limit: u64) -> Result<bool> {
    let include_empty = match check {
        TieCheck::Off => return Ok(true),
        TieCheck::NonFlat => true,
        TieCheck::Distinguishable => false,
        TieCheck::StrictEquilibria => {
            let eps = 1e-12;
            return match enumerate_equilibria(objective, eps, TieRule::Weak, limit) {
                Ok(weak) => Ok(weak
                    .iter()
                    .all(|s| is_equilibrium_with(objective, &s.profile, eps, TieRule::Strict))),
                Err(Error::TooLarge { .. }) => {
                    log::debug!("instance too large for the tie check; accepted unchecked");
                    Ok(true)
                }
                Err(e) => Err(e),
            };
        }
    };
    let opts = DeltaMaxOptions {
        include_empty,
        limit,
    };
    let est = match delta_max(objective, DeltaMaxMode::Exact, opts) {
        Ok(e) => e,
        Err(Error::TooLarge { .. }) => {
            log::debug!("instance too large for the tie check; accepted unchecked");
            return Ok(true);
        }
        Err(e) => return Err(e),
    };
    Ok(match check {
        TieCheck::NonFlat => est.value > 0.0,
        _ => est.value > 0.0 && est.distinguishable == Some(true),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{Choice, Objective};

    const SAMPLE: &str = "userId,movieId,rating,timestamp\n\
        1,10,4.0,0\n\
        2,10,3.0,0\n\
        3,10,2.5,0\n\
        1,20,5.0,0\n\
        4,20,3.5,0\n\
        5,30,1.0,0\n";

    #[test]
    fn parses_well_formed_rows() {
        let t =
            read_ratings("userId,movieId,rating,timestamp\n1,1,4,0\n2,1,3,0\n3,2,5,0\n".as_bytes())
                .unwrap();
        assert_eq!(t.len(), 3);
        assert!(t.skipped.is_empty());
    }

    #[test]
    fn malformed_rows_are_skipped_with_line_numbers() {
        let t = read_ratings("userId,movieId,rating\n1,1,abc\n2,1,4\n3,1,9\n".as_bytes()).unwrap();
        assert_eq!(t.len(), 1);
        let lines: Vec<u64> = t.skipped.iter().map(|s| s.line).collect();
        assert_eq!(lines, vec![2, 4]);
        assert!(t.skipped[0].reason.contains("abc"));
    }

    #[test]
    fn header_only_file_is_empty() {
        let t = read_ratings("userId,movieId,rating,timestamp\n".as_bytes()).unwrap();
        assert!(t.is_empty());
    }

    #[test]
    fn missing_column_is_an_error() {
        assert!(matches!(
            read_ratings("userId,rating\n1,4\n".as_bytes()),
            Err(Error::MissingColumn(c)) if c == "movieId"
        ));
    }

    #[test]
    fn duplicates_keep_the_last_rating() {
        let t = read_ratings("userId,movieId,rating\n1,1,2\n1,1,4.5\n".as_bytes()).unwrap();
        assert_eq!(
            t.records,
            vec![Rating {
                user: 1,
                movie: 1,
                rating: 4.5
            }]
        );
    }

    #[test]
    fn liker_sets_by_inspection() {
        let t = read_ratings(SAMPLE.as_bytes()).unwrap();
        let b = build_coverage(&t, 2, 3.0, 1, None).unwrap();
        // Movie 10 liked by users 1, 2; movie 20 by 1, 4; movie 30 by nobody.
        assert_eq!(b.movie_ids, vec![10, 20]);
        assert_eq!(b.user_ids, vec![1, 2, 4]);
        assert_eq!(b.objective.liker_ids(0), vec![0, 1]);
        assert_eq!(b.objective.liker_ids(1), vec![0, 2]);
        assert_eq!(
            b.objective
                .value(&[Choice::strategy(0), Choice::strategy(1)]),
            3.0
        );
    }

    #[test]
    fn popularity_floor_and_cap() {
        let t = read_ratings(SAMPLE.as_bytes()).unwrap();
        assert_eq!(
            build_coverage(&t, 1, 3.0, 2, None).unwrap().movie_ids,
            vec![10, 20]
        );
        assert!(matches!(
            build_coverage(&t, 1, 3.0, 3, None),
            Err(Error::NoSurvivingMovies)
        ));
        assert_eq!(
            build_coverage(&t, 1, 2.5, 1, Some(1)).unwrap().movie_ids,
            vec![10]
        );
        assert!(matches!(
            build_coverage(&t, 1, 5.5, 1, None),
            Err(Error::NoSurvivingMovies)
        ));
    }

    #[test]
    fn synthetic_instances_are_seeded() {
        let a = synth_instance(4, 5, 30, 0.2, 7, SynthOptions::default()).unwrap();
        let b = synth_instance(4, 5, 30, 0.2, 7, SynthOptions::default()).unwrap();
        let c = synth_instance(4, 5, 30, 0.2, 8, SynthOptions::default()).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn full_density_is_flat() {
        let opts = SynthOptions {
            tie_check: TieCheck::Off,
            ..Default::default()
        };
        let f = synth_instance(3, 4, 10, 1.0, 1, opts).unwrap();
        for s in 0..4 {
            assert_eq!(f.liker_count(s), 10);
        }
        assert!(matches!(
            synth_instance(3, 4, 10, 1.0, 1, SynthOptions::default()),
            Err(Error::RetriesExhausted(_))
        ));
    }

    #[test]
    fn strict_equilibria_check_rejects_ties() {
        let opts = SynthOptions {
            tie_check: TieCheck::StrictEquilibria,
            max_retries: 500,
            ..Default::default()
        };
        let f = synth_instance(4, 5, 30, 0.2, 3, opts).unwrap();
        let weak = enumerate_equilibria(&f, 1e-12, TieRule::Weak, crate::DEFAULT_ENUMERATION_LIMIT)
            .unwrap();
        let strict =
            enumerate_equilibria(&f, 1e-12, TieRule::Strict, crate::DEFAULT_ENUMERATION_LIMIT)
                .unwrap();
        assert!(!weak.is_empty());
        assert_eq!(weak.len(), strict.len());

        // Identical liker sets make every equilibrium weak.
        let twin = CoverageObjective::new(2, 4, vec![vec![0, 1], vec![0, 1], vec![2]]).unwrap();
        assert!(!accepts(
            &twin,
            TieCheck::StrictEquilibria,
            crate::DEFAULT_ENUMERATION_LIMIT
        )
        .unwrap());
        assert!(accepts(&twin, TieCheck::StrictEquilibria, 1).unwrap());
    }

    #[test]
    fn parameter_validation() {
        let o = SynthOptions::default();
        assert!(synth_instance(0, 5, 30, 0.2, 1, o).is_err());
        assert!(synth_instance(2, 5, 30, 0.0, 1, o).is_err());
        assert!(synth_instance(2, 5, 30, 1.5, 1, o).is_err());
    }
}
