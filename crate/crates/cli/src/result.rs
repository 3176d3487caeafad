//! The match result document written to standard output.

use serde::{Deserialize, Serialize};

use ideophone::{
    Classifier, IdeophoneIndex, MatchCandidate, PlacementBox, QuadrantTag, Recommendation,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateDoc {
    pub id: String,
    pub forms: Vec<String>,
    pub romaji: String,
    pub english: Vec<String>,
    pub distance: f64,
    pub classifier: Classifier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementDoc {
    pub quadrant: QuadrantTag,
    pub anchor: (u32, u32),
    pub angle_deg: f64,
    pub glyph_height: u32,
}

impl From<&PlacementBox> for PlacementDoc {
    fn from(p: &PlacementBox) -> Self {
        PlacementDoc {
            quadrant: p.quadrant,
            anchor: p.anchor,
            angle_deg: p.angle,
            glyph_height: p.glyph_height,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub photo_id: String,
    pub selected: CandidateDoc,
    pub pool: Vec<CandidateDoc>,
    pub placement: Option<PlacementDoc>,
    pub seed: u64,
}

fn candidate_doc(index: &IdeophoneIndex, c: &MatchCandidate) -> CandidateDoc {
    let entry = &index
        .get(&c.entry_id)
        .expect("candidate comes from this index")
        .entry;
    CandidateDoc {
        id: entry.id.clone(),
        forms: entry.forms.clone(),
        romaji: entry.romaji.clone(),
        english: entry.english_equivalents.clone(),
        distance: c.distance,
        classifier: c.classifier.clone(),
    }
}

impl ResultDocument {
    pub fn new(
        photo_id: &str,
        rec: &Recommendation,
        index: &IdeophoneIndex,
        placement: Option<&PlacementBox>,
    ) -> Self {
        ResultDocument {
            photo_id: photo_id.to_string(),
            selected: candidate_doc(index, &rec.selected),
            pool: rec.pool.iter().map(|c| candidate_doc(index, c)).collect(),
            placement: placement.map(PlacementDoc::from),
            seed: rec.seed,
        }
    }

    pub fn recommendation(&self) -> Recommendation {
        let candidate = |d: &CandidateDoc| MatchCandidate {
            entry_id: d.id.clone(),
            distance: d.distance,
            classifier: d.classifier.clone(),
        };
        Recommendation {
            selected: candidate(&self.selected),
            pool: self.pool.iter().map(candidate).collect(),
            seed: self.seed,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("result document serializes")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}
