//! Closed-category sociodemographic profile collected at the end of a
//! session.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Error for a code outside a closed category list.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{value:?} is not a valid {field} code")]
pub struct UnknownCode {
    pub field: &'static str,
    pub value: String,
}

macro_rules! categorical {
    ($(#[$meta:meta])* $name:ident, $field:literal { $($variant:ident => $code:literal : $share:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];
            /// Full-sample shares (percent) of the reference survey panel.
            pub const SHARES: &'static [f64] = &[$($share),+];
            pub const FIELD: &'static str = $field;

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $code),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = UnknownCode;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($code => Ok($name::$variant),)+
                    other => Err(UnknownCode { field: $field, value: other.to_string() }),
                }
            }
        }

        impl Serialize for $name {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(self.as_str())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

categorical!(Gender, "gender" {
    Woman => "woman": 51.65,
    Man => "man": 48.35,
});

categorical!(AgeGroup, "age" {
    From15To29 => "15-29": 11.96,
    From30To44 => "30-44": 22.96,
    From45To59 => "45-59": 27.33,
    From60To74 => "60-74": 23.35,
    From75To89 => "75-89": 14.30,
    Over90 => "90+": 0.10,
});

categorical!(Children, "children" {
    None => "0": 37.35,
    One => "1": 18.48,
    Two => "2": 27.72,
    Three => "3": 12.16,
    FourOrMore => "4+": 4.28,
});

categorical!(MaritalStatus, "marital_status" {
    Married => "married": 50.19,
    Cohabiting => "cohabiting": 9.82,
    Widowed => "widowed": 3.60,
    Single => "single": 36.38,
});

categorical!(EmploymentStatus, "employment_status" {
    Employed => "employed": 51.56,
    Unemployed => "unemployed": 7.39,
    Student => "student": 6.42,
    Retired => "retired": 27.04,
    OtherInactive => "other_inactive": 7.59,
});

categorical!(Occupation, "occupation" {
    Farmer => "farmer": 1.56,
    Artisan => "artisan": 4.77,
    Manager => "manager": 21.11,
    Intermediate => "intermediate": 20.91,
    Employee => "employee": 28.89,
    ManualWorker => "manual_worker": 14.11,
    NotConcerned => "not_concerned": 8.66,
});

categorical!(Education, "education" {
    Primary => "primary": 3.31,
    LowerSecondary => "lower_secondary": 8.95,
    UpperSecondary => "upper_secondary": 32.88,
    ShortTertiary => "short_tertiary": 21.79,
    Bachelor => "bachelor": 14.01,
    MasterDoctorate => "master_doctorate": 19.07,
});

categorical!(
    /// Gross monthly income decile bracket.
    IncomeBracket, "income_bracket" {
    D1 => "d1": 12.84,
    D2 => "d2": 10.99,
    D3 => "d3": 8.27,
    D4 => "d4": 10.89,
    D5 => "d5": 11.38,
    D6 => "d6": 10.12,
    D7 => "d7": 8.75,
    D8 => "d8": 11.48,
    D9 => "d9": 9.05,
    D10 => "d10": 6.23,
});

categorical!(Voted, "voted" {
    Yes => "yes": 82.39,
    No => "no": 17.61,
});

categorical!(PoliticalView, "political_view" {
    NoReply => "no_reply": 32.88,
    ExtremeLeft => "extreme_left": 2.04,
    Left => "left": 21.79,
    Centre => "centre": 20.82,
    Right => "right": 15.76,
    ExtremeRight => "extreme_right": 6.71,
});

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RespondentProfile {
    pub gender: Gender,
    pub age: AgeGroup,
    pub children: Children,
    pub marital_status: MaritalStatus,
    pub employment_status: EmploymentStatus,
    pub occupation: Occupation,
    pub education: Education,
    pub income_bracket: IncomeBracket,
    pub voted: Voted,
    pub political_view: PoliticalView,
}

impl RespondentProfile {
    pub const FIELDS: [&'static str; 10] = [
        Gender::FIELD,
        AgeGroup::FIELD,
        Children::FIELD,
        MaritalStatus::FIELD,
        EmploymentStatus::FIELD,
        Occupation::FIELD,
        Education::FIELD,
        IncomeBracket::FIELD,
        Voted::FIELD,
        PoliticalView::FIELD,
    ];

    pub fn codes(&self) -> [&'static str; 10] {
        [
            self.gender.as_str(),
            self.age.as_str(),
            self.children.as_str(),
            self.marital_status.as_str(),
            self.employment_status.as_str(),
            self.occupation.as_str(),
            self.education.as_str(),
            self.income_bracket.as_str(),
            self.voted.as_str(),
            self.political_view.as_str(),
        ]
    }

    /// Parses the ten codes in [`Self::FIELDS`] order.
    pub fn from_codes(codes: &[&str]) -> Result<Self, UnknownCode> {
        if codes.len() != 10 {
            return Err(UnknownCode {
                field: "profile",
                value: format!("{} fields", codes.len()),
            });
        }
        Ok(Self {
            gender: codes[0].parse()?,
            age: codes[1].parse()?,
            children: codes[2].parse()?,
            marital_status: codes[3].parse()?,
            employment_status: codes[4].parse()?,
            occupation: codes[5].parse()?,
            education: codes[6].parse()?,
            income_bracket: codes[7].parse()?,
            voted: codes[8].parse()?,
            political_view: codes[9].parse()?,
        })
    }
}
