use serde::{Deserialize, Serialize};

use super::{Day, EventId, TransactionEvent};
use crate::error::{MugrepError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Partition {
    Train,
    Validation,
    Test,
}

/// Disjoint chronological partitions of the event ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<EventId>,
    pub validation: Vec<EventId>,
    pub test: Vec<EventId>,
    /// First day of the validation period.
    pub validation_start: Day,
    /// First day of the test period.
    pub test_start: Day,
}

impl DatasetSplit {
    pub fn partition_of(&self, date: Day) -> Partition {
        if date >= self.test_start {
            Partition::Test
        } else if date >= self.validation_start {
            Partition::Validation
        } else {
            Partition::Train
        }
    }
}

/// Test is the last `test_days` days of the date range, validation the
/// `validation_days` before that, train everything earlier.
pub fn split_chronological(events: &[TransactionEvent], validation_days: Day, test_days: Day) -> Result<DatasetSplit> {
    if validation_days <= 0 || test_days <= 0 {
        return Err(MugrepError::DegenerateSplit(
            "validation and test spans must be positive".into(),
        ));
    }
    let last = events
        .iter()
        .map(|e| e.date)
        .max()
        .ok_or_else(|| MugrepError::DegenerateSplit("no events".into()))?;
    let test_start = last - test_days + 1;
    let validation_start = test_start - validation_days;

    let mut split = DatasetSplit {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
        validation_start,
        test_start,
    };
    for e in events {
        match split.partition_of(e.date) {
            Partition::Train => split.train.push(e.id),
            Partition::Validation => split.validation.push(e.id),
            Partition::Test => split.test.push(e.id),
        }
    }
    for (name, part) in [
        ("train", &split.train),
        ("validation", &split.validation),
        ("test", &split.test),
    ] {
        if part.is_empty() {
            return Err(MugrepError::DegenerateSplit(format!("{name} partition is empty")));
        }
    }
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::Point;

    fn events(dates: &[Day]) -> Vec<TransactionEvent> {
        dates
            .iter()
            .enumerate()
            .map(|(i, &date)| TransactionEvent {
                id: i as u32,
                location: Point::default(),
                date,
                community_id: 0,
                attributes: Default::default(),
                price: Some(1.0),
            })
            .collect()
    }

    #[test]
    fn two_year_range() {
        let ev = events(&(0..730).collect::<Vec<_>>());
        let s = split_chronological(&ev, 30, 150).unwrap();
        assert_eq!(*s.train.last().unwrap(), 549);
        assert_eq!((s.validation[0], *s.validation.last().unwrap()), (550, 579));
        assert_eq!((s.test[0], *s.test.last().unwrap()), (580, 729));
    }

    #[test]
    fn single_day_is_degenerate() {
        let ev = events(&[3, 3, 3]);
        assert!(matches!(
            split_chronological(&ev, 30, 150),
            Err(MugrepError::DegenerateSplit(_))
        ));
        assert!(split_chronological(&[], 1, 1).is_err());
    }

    #[test]
    fn train_is_strictly_before_cutoff() {
        let dates: Vec<Day> = (0..100).flat_map(|d| [d, d]).collect();
        let ev = events(&dates);
        let s = split_chronological(&ev, 10, 10).unwrap();
        let oracle: Vec<u32> = ev.iter().filter(|e| e.date < 80).map(|e| e.id).collect();
        assert_eq!(s.train, oracle);
        let max_train = s.train.iter().map(|&i| ev[i as usize].date).max().unwrap();
        let min_val = s.validation.iter().map(|&i| ev[i as usize].date).min().unwrap();
        let max_val = s.validation.iter().map(|&i| ev[i as usize].date).max().unwrap();
        let min_test = s.test.iter().map(|&i| ev[i as usize].date).min().unwrap();
        assert!(max_train < min_val && min_val <= max_val && max_val < min_test);
        assert_eq!(s.train.len() + s.validation.len() + s.test.len(), ev.len());
    }
}
