//! Context dimensions, their abstraction into concepts, and aggregation into
//! situations.
//!
//! Raw readings (a timestamp, a place identifier, the user's social group and
//! an optional cognitive action) are abstracted against a small time
//! vocabulary and a place → city → region tree. The resulting [`Situation`]
//! is the state of the learning agent; [`Situation::encode`] gives it a
//! stable integer key.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::{Error, Result};

const SECONDS_PER_HOUR: i64 = 3_600;
const SECONDS_PER_DAY: i64 = 86_400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TimeGranularity {
    Hour,
    PeriodOfDay,
    DayType,
}

impl TimeGranularity {
    pub fn as_str(self) -> &'static str {
        match self {
            TimeGranularity::Hour => "hour",
            TimeGranularity::PeriodOfDay => "period-of-day",
            TimeGranularity::DayType => "day-type",
        }
    }
}

impl FromStr for TimeGranularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hour" => Ok(TimeGranularity::Hour),
            "period-of-day" | "period" => Ok(TimeGranularity::PeriodOfDay),
            "day-type" => Ok(TimeGranularity::DayType),
            other => Err(Error::UnsupportedGranularity(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Period {
    Night,
    Morning,
    Midday,
    Afternoon,
    Evening,
}

impl Period {
    pub const ALL: [Period; 5] = [
        Period::Night,
        Period::Morning,
        Period::Midday,
        Period::Afternoon,
        Period::Evening,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Period::Night => "night",
            Period::Morning => "morning",
            Period::Midday => "midday",
            Period::Afternoon => "afternoon",
            Period::Evening => "evening",
        }
    }

    fn index(self) -> u8 {
        self as u8
    }

    /// Neighbouring periods on the daily cycle (evening wraps to night).
    pub fn is_adjacent(self, other: Period) -> bool {
        let d = (self.index() as i8 - other.index() as i8).rem_euclid(5);
        d == 1 || d == 4
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DayType {
    Weekday,
    Weekend,
}

impl DayType {
    pub fn as_str(self) -> &'static str {
        match self {
            DayType::Weekday => "weekday",
            DayType::Weekend => "weekend",
        }
    }
}

/// A time concept at one of the three supported granularities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TimeConcept {
    Hour(u8),
    Period(Period),
    Day(DayType),
}

impl TimeConcept {
    pub fn granularity(self) -> TimeGranularity {
        match self {
            TimeConcept::Hour(_) => TimeGranularity::Hour,
            TimeConcept::Period(_) => TimeGranularity::PeriodOfDay,
            TimeConcept::Day(_) => TimeGranularity::DayType,
        }
    }

    pub fn label(self) -> String {
        match self {
            TimeConcept::Hour(h) => format!("{h:02}h"),
            TimeConcept::Period(p) => p.as_str().to_string(),
            TimeConcept::Day(d) => d.as_str().to_string(),
        }
    }

    pub fn from_label(label: &str) -> Result<Self> {
        if let Some(h) = label.strip_suffix('h') {
            let hour: u8 = h
                .parse()
                .map_err(|_| Error::Malformed(format!("time label {label:?}")))?;
            if hour < 24 {
                return Ok(TimeConcept::Hour(hour));
            }
            return Err(Error::Malformed(format!("time label {label:?}")));
        }
        for p in Period::ALL {
            if p.as_str() == label {
                return Ok(TimeConcept::Period(p));
            }
        }
        match label {
            "weekday" => Ok(TimeConcept::Day(DayType::Weekday)),
            "weekend" => Ok(TimeConcept::Day(DayType::Weekend)),
            _ => Err(Error::Malformed(format!("time label {label:?}"))),
        }
    }

    /// Position in the flat 31-value time vocabulary (24 hours, 5 periods,
    /// 2 day types).
    fn code(self) -> u64 {
        match self {
            TimeConcept::Hour(h) => h as u64,
            TimeConcept::Period(p) => 24 + p.index() as u64,
            TimeConcept::Day(DayType::Weekday) => 29,
            TimeConcept::Day(DayType::Weekend) => 30,
        }
    }

    fn from_code(code: u64) -> Option<Self> {
        match code {
            0..=23 => Some(TimeConcept::Hour(code as u8)),
            24..=28 => Some(TimeConcept::Period(Period::ALL[(code - 24) as usize])),
            29 => Some(TimeConcept::Day(DayType::Weekday)),
            30 => Some(TimeConcept::Day(DayType::Weekend)),
            _ => None,
        }
    }

    /// Moves the concept to a coarser (or equal) granularity.
    ///
    /// An hour generalizes to the period containing it. Day type cannot be
    /// recovered from an hour or a period, so that conversion is an error.
    pub fn generalize(self, to: TimeGranularity, vocab: &TimeVocabulary) -> Result<Self> {
        match (self, to) {
            (c, g) if c.granularity() == g => Ok(c),
            (TimeConcept::Hour(h), TimeGranularity::PeriodOfDay) => Ok(TimeConcept::Period(vocab.period_of_hour(h))),
            (c, g) => Err(Error::UnsupportedGranularity(format!(
                "{} -> {}",
                c.granularity().as_str(),
                g.as_str()
            ))),
        }
    }
}

/// Period boundaries and the local-time offset.
///
/// With boundaries `[b1, b2, b3, b4]`: night is `[0, b1)`, morning `[b1, b2)`,
/// midday `[b2, b3)`, afternoon `[b3, b4)` and evening `[b4, 24)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeVocabulary {
    boundaries: [u8; 4],
    utc_offset_seconds: i32,
}

impl Default for TimeVocabulary {
    fn default() -> Self {
        TimeVocabulary {
            boundaries: [6, 11, 14, 18],
            utc_offset_seconds: 0,
        }
    }
}

impl TimeVocabulary {
    pub fn new(boundaries: [u8; 4], utc_offset_seconds: i32) -> Result<Self> {
        let increasing = boundaries.windows(2).all(|w| w[0] < w[1]);
        if boundaries[0] == 0 || boundaries[3] >= 24 || !increasing {
            return Err(Error::InvalidVocabulary(format!(
                "period boundaries {boundaries:?} must be strictly increasing within 1..=23"
            )));
        }
        if utc_offset_seconds.unsigned_abs() > 14 * 3_600 {
            return Err(Error::InvalidVocabulary(format!(
                "utc offset {utc_offset_seconds}s out of range"
            )));
        }
        Ok(TimeVocabulary {
            boundaries,
            utc_offset_seconds,
        })
    }

    pub fn boundaries(&self) -> [u8; 4] {
        self.boundaries
    }

    pub fn utc_offset_seconds(&self) -> i32 {
        self.utc_offset_seconds
    }

    pub fn period_of_hour(&self, hour: u8) -> Period {
        let b = self.boundaries;
        if hour < b[0] {
            Period::Night
        } else if hour < b[1] {
            Period::Morning
        } else if hour < b[2] {
            Period::Midday
        } else if hour < b[3] {
            Period::Afternoon
        } else {
            Period::Evening
        }
    }

    fn local_seconds(&self, timestamp: u64) -> i64 {
        timestamp as i64 + self.utc_offset_seconds as i64
    }

    pub fn local_hour(&self, timestamp: u64) -> u8 {
        (self.local_seconds(timestamp).rem_euclid(SECONDS_PER_DAY) / SECONDS_PER_HOUR) as u8
    }

    pub fn day_type(&self, timestamp: u64) -> DayType {
        let days = self.local_seconds(timestamp).div_euclid(SECONDS_PER_DAY);
        // 1970-01-01 was a Thursday; Monday = 0.
        match (days + 3).rem_euclid(7) {
            5 | 6 => DayType::Weekend,
            _ => DayType::Weekday,
        }
    }
}

pub fn abstract_time(timestamp: u64, granularity: TimeGranularity, vocab: &TimeVocabulary) -> TimeConcept {
    match granularity {
        TimeGranularity::Hour => TimeConcept::Hour(vocab.local_hour(timestamp)),
        TimeGranularity::PeriodOfDay => TimeConcept::Period(vocab.period_of_hour(vocab.local_hour(timestamp))),
        TimeGranularity::DayType => TimeConcept::Day(vocab.day_type(timestamp)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LocationGranularity {
    Place,
    City,
    Region,
}

impl LocationGranularity {
    pub fn as_str(self) -> &'static str {
        match self {
            LocationGranularity::Place => "place",
            LocationGranularity::City => "city",
            LocationGranularity::Region => "region",
        }
    }

    fn code(self) -> u64 {
        match self {
            LocationGranularity::Place => 0,
            LocationGranularity::City => 1,
            LocationGranularity::Region => 2,
        }
    }
}

impl FromStr for LocationGranularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "place" => Ok(LocationGranularity::Place),
            "city" => Ok(LocationGranularity::City),
            "region" => Ok(LocationGranularity::Region),
            other => Err(Error::UnsupportedGranularity(other.to_string())),
        }
    }
}

/// Leaf index into a [`LocationHierarchy`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PlaceId(pub u32);

/// A node of the location tree together with its ancestors.
///
/// Carrying the ancestor chain lets similarity and encoding work without the
/// hierarchy at hand. Levels finer than `granularity` are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LocationConcept {
    pub granularity: LocationGranularity,
    pub region: u32,
    pub city: Option<u32>,
    pub place: Option<u32>,
}

impl LocationConcept {
    /// Index of the node within its own level.
    pub fn index(&self) -> u32 {
        match self.granularity {
            LocationGranularity::Place => self.place.unwrap_or_default(),
            LocationGranularity::City => self.city.unwrap_or_default(),
            LocationGranularity::Region => self.region,
        }
    }
}

const MAX_NODES_PER_LEVEL: usize = 1 << 20;

/// `(child, parent)` name pairs.
pub type NamePairs<'a> = Vec<(&'a str, &'a str)>;

/// The place → city → region tree. Names are kept sorted so indices only
/// depend on the set of names, not on the order they were declared in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocationHierarchy {
    places: Vec<(String, u32)>,
    cities: Vec<(String, u32)>,
    regions: Vec<String>,
}

impl LocationHierarchy {
    /// `cities` maps city → region; `places` maps place → city.
    pub fn new<S: AsRef<str>>(cities: &[(S, S)], places: &[(S, S)]) -> Result<Self> {
        let mut regions: Vec<String> = cities.iter().map(|(_, r)| r.as_ref().to_string()).collect();
        regions.sort();
        regions.dedup();

        let mut city_rows: Vec<(String, String)> = cities
            .iter()
            .map(|(c, r)| (c.as_ref().to_string(), r.as_ref().to_string()))
            .collect();
        city_rows.sort();
        for w in city_rows.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidVocabulary(format!("city {:?} declared twice", w[0].0)));
            }
        }
        let city_list: Vec<(String, u32)> = city_rows
            .into_iter()
            .map(|(c, r)| {
                let region = regions.binary_search(&r).expect("region collected above") as u32;
                (c, region)
            })
            .collect();

        let mut place_rows: Vec<(String, String)> = places
            .iter()
            .map(|(p, c)| (p.as_ref().to_string(), c.as_ref().to_string()))
            .collect();
        place_rows.sort();
        for w in place_rows.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidVocabulary(format!("place {:?} declared twice", w[0].0)));
            }
        }
        let mut place_list = Vec::with_capacity(place_rows.len());
        for (p, c) in place_rows {
            let city = city_list
                .binary_search_by(|(name, _)| name.as_str().cmp(c.as_str()))
                .map_err(|_| Error::UnknownCity(c.clone()))?;
            place_list.push((p, city as u32));
        }
        if place_list.is_empty() {
            return Err(Error::InvalidVocabulary("no places declared".into()));
        }
        if place_list.len() >= MAX_NODES_PER_LEVEL || city_list.len() >= MAX_NODES_PER_LEVEL {
            return Err(Error::InvalidVocabulary("too many locations".into()));
        }
        Ok(LocationHierarchy {
            places: place_list,
            cities: city_list,
            regions,
        })
    }

    pub fn place_id(&self, name: &str) -> Result<PlaceId> {
        self.places
            .binary_search_by(|(p, _)| p.as_str().cmp(name))
            .map(|i| PlaceId(i as u32))
            .map_err(|_| Error::UnknownPlace(name.to_string()))
    }

    pub fn place_names(&self) -> impl Iterator<Item = &str> {
        self.places.iter().map(|(p, _)| p.as_str())
    }

    /// `(city, region)` and `(place, city)` rows by name, in the argument
    /// order of [`LocationHierarchy::new`].
    pub fn tables(&self) -> (NamePairs<'_>, NamePairs<'_>) {
        let places = self
            .places
            .iter()
            .map(|(p, c)| (p.as_str(), self.cities[*c as usize].0.as_str()))
            .collect();
        let cities = self
            .cities
            .iter()
            .map(|(c, r)| (c.as_str(), self.regions[*r as usize].as_str()))
            .collect();
        (cities, places)
    }

    pub fn abstract_location(&self, place: PlaceId, granularity: LocationGranularity) -> Result<LocationConcept> {
        let (_, city) = self
            .places
            .get(place.0 as usize)
            .ok_or_else(|| Error::UnknownPlace(format!("#{}", place.0)))?;
        let region = self.cities[*city as usize].1;
        Ok(match granularity {
            LocationGranularity::Place => LocationConcept {
                granularity,
                region,
                city: Some(*city),
                place: Some(place.0),
            },
            LocationGranularity::City => LocationConcept {
                granularity,
                region,
                city: Some(*city),
                place: None,
            },
            LocationGranularity::Region => LocationConcept {
                granularity,
                region,
                city: None,
                place: None,
            },
        })
    }

    pub fn label(&self, concept: &LocationConcept) -> &str {
        match concept.granularity {
            LocationGranularity::Place => &self.places[concept.index() as usize].0,
            LocationGranularity::City => &self.cities[concept.index() as usize].0,
            LocationGranularity::Region => &self.regions[concept.index() as usize],
        }
    }

    fn concept_from_index(&self, granularity: LocationGranularity, index: u32) -> Option<LocationConcept> {
        match granularity {
            LocationGranularity::Place => self.abstract_location(PlaceId(index), granularity).ok(),
            LocationGranularity::City => self.cities.get(index as usize).map(|(_, region)| LocationConcept {
                granularity,
                region: *region,
                city: Some(index),
                place: None,
            }),
            LocationGranularity::Region => ((index as usize) < self.regions.len()).then_some(LocationConcept {
                granularity,
                region: index,
                city: None,
                place: None,
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum CognitiveAction {
    #[default]
    None,
    ReadDocument,
    OpenFolder,
    SendEmail,
    Call,
}

impl CognitiveAction {
    pub const ALL: [CognitiveAction; 5] = [
        CognitiveAction::None,
        CognitiveAction::ReadDocument,
        CognitiveAction::OpenFolder,
        CognitiveAction::SendEmail,
        CognitiveAction::Call,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CognitiveAction::None => "none",
            CognitiveAction::ReadDocument => "read-document",
            CognitiveAction::OpenFolder => "open-folder",
            CognitiveAction::SendEmail => "send-email",
            CognitiveAction::Call => "call",
        }
    }
}

impl FromStr for CognitiveAction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CognitiveAction::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::Malformed(format!("cognitive action {s:?}")))
    }
}

/// Social group (team) identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroupId(pub u32);

impl fmt::Display for GroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "g{}", self.0)
    }
}

/// One sensed reading, before abstraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RawContext {
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub place: PlaceId,
    pub group: GroupId,
    pub cognitive: CognitiveAction,
}

/// Canonical integer key of a situation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateId(pub u64);

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

// Bit layout of a StateId, low to high:
// time code (5) | location granularity (2) | location index (20) | cognitive (3) | group (32)
const TIME_BITS: u32 = 5;
const LOC_GRAN_SHIFT: u32 = TIME_BITS;
const LOC_INDEX_SHIFT: u32 = LOC_GRAN_SHIFT + 2;
const COGNITIVE_SHIFT: u32 = LOC_INDEX_SHIFT + 20;
const GROUP_SHIFT: u32 = COGNITIVE_SHIFT + 3;

/// An aggregated context point; the agent's state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Situation {
    pub time: TimeConcept,
    pub location: LocationConcept,
    pub group: GroupId,
    pub cognitive: CognitiveAction,
}

impl Situation {
    /// Injective over the declared vocabularies and independent of any
    /// runtime state, so keys survive restarts.
    pub fn encode(&self) -> StateId {
        let loc = &self.location;
        StateId(
            self.time.code()
                | loc.granularity.code() << LOC_GRAN_SHIFT
                | (loc.index() as u64) << LOC_INDEX_SHIFT
                | (self.cognitive as u64) << COGNITIVE_SHIFT
                | (self.group.0 as u64) << GROUP_SHIFT,
        )
    }

    pub fn decode(id: StateId, hierarchy: &LocationHierarchy) -> Result<Situation> {
        let bad = || Error::Malformed(format!("state id {}", id.0));
        let raw = id.0;
        let time = TimeConcept::from_code(raw & ((1 << TIME_BITS) - 1)).ok_or_else(bad)?;
        let granularity = match (raw >> LOC_GRAN_SHIFT) & 0b11 {
            0 => LocationGranularity::Place,
            1 => LocationGranularity::City,
            2 => LocationGranularity::Region,
            _ => return Err(bad()),
        };
        let index = ((raw >> LOC_INDEX_SHIFT) & ((1 << 20) - 1)) as u32;
        let location = hierarchy.concept_from_index(granularity, index).ok_or_else(bad)?;
        let cognitive = *CognitiveAction::ALL
            .get(((raw >> COGNITIVE_SHIFT) & 0b111) as usize)
            .ok_or_else(bad)?;
        let group = GroupId((raw >> GROUP_SHIFT) as u32);
        Ok(Situation {
            time,
            location,
            group,
            cognitive,
        })
    }

    /// The projection used as a learning state: the cognitive dimension is
    /// dropped unless `include_cognitive` is set.
    pub fn state_view(&self, include_cognitive: bool) -> Situation {
        Situation {
            cognitive: if include_cognitive {
                self.cognitive
            } else {
                CognitiveAction::None
            },
            ..*self
        }
    }
}

/// Vocabulary and hierarchy needed to abstract raw readings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextModel {
    pub vocabulary: TimeVocabulary,
    pub hierarchy: LocationHierarchy,
}

impl ContextModel {
    pub fn new(vocabulary: TimeVocabulary, hierarchy: LocationHierarchy) -> Self {
        ContextModel { vocabulary, hierarchy }
    }

    pub fn abstract_time(&self, timestamp: u64, granularity: TimeGranularity) -> TimeConcept {
        abstract_time(timestamp, granularity, &self.vocabulary)
    }

    pub fn abstract_location(&self, place: PlaceId, granularity: LocationGranularity) -> Result<LocationConcept> {
        self.hierarchy.abstract_location(place, granularity)
    }

    pub fn aggregate(
        &self,
        raw: &RawContext,
        time_granularity: TimeGranularity,
        location_granularity: LocationGranularity,
    ) -> Result<Situation> {
        Ok(Situation {
            time: self.abstract_time(raw.timestamp, time_granularity),
            location: self.abstract_location(raw.place, location_granularity)?,
            group: raw.group,
            cognitive: raw.cognitive,
        })
    }

    /// Human-readable form, e.g. `morning@office/g0/none`.
    pub fn describe(&self, situation: &Situation) -> String {
        format!(
            "{}@{}/{}/{}",
            situation.time.label(),
            self.hierarchy.label(&situation.location),
            situation.group,
            situation.cognitive.as_str()
        )
    }
}
