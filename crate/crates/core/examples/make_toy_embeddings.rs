//! Regenerates `data/toy/embeddings.txt`.
//!
//! Every token of the toy KB, templates, suggestion corpus and LM corpus gets a
//! 50-dimensional vector. Topical words are drawn around one centre per topic;
//! everything else (function words, generic verbs) is small isotropic noise.
//!
//!     cargo run -p qgen-core --example make_toy_embeddings

use std::collections::BTreeSet;
use std::fs;
use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use qgen::embed::EmbeddingTable;
use qgen::text::tokens;

const DIM: usize = 50;

const TOPICS: &[(&str, &[&str])] = &[
    (
        "tools",
        &[
            "jigsaw",
            "saw",
            "saws",
            "circular",
            "blade",
            "blades",
            "drill",
            "drills",
            "bits",
            "bit",
            "chuck",
            "router",
            "sander",
            "sanders",
            "sanding",
            "sand",
            "sanded",
            "lawn",
            "mower",
            "grinder",
            "bench",
            "chisel",
            "sharpening",
            "sharpen",
            "sharpens",
            "sharpener",
            "stone",
            "file",
            "wood",
            "woodworking",
            "deck",
            "concrete",
            "cut",
            "cuts",
            "cutting",
            "curves",
            "curve",
            "groove",
            "hammer",
            "oscillating",
            "multi",
            "tool",
            "tools",
            "plywood",
            "board",
            "screwdriver",
            "screw",
            "driver",
            "miter",
            "angle",
            "orbital",
            "belt",
            "sandpaper",
            "stain",
            "staining",
            "drywall",
            "tile",
            "metal",
            "power",
            "workshop",
            "curvecut",
            "grooving",
            "ripcut",
            "rip",
            "straight",
            "level",
            "tape",
            "measure",
            "rust",
            "acrylic",
            "paint",
            "hole",
            "battery",
            "cordless",
            "screws",
            "fence",
            "grass",
            "height",
            "gloves",
            "safety",
            "glasses",
            "smooth",
            "rough",
            "dull",
            "sharp",
            "lumber",
        ],
    ),
    (
        "kitchen",
        &[
            "chopsticks",
            "french",
            "press",
            "pressure",
            "cooker",
            "cook",
            "cooking",
            "rice",
            "bread",
            "flour",
            "oil",
            "olive",
            "coconut",
            "frying",
            "chicken",
            "kitchen",
            "knife",
            "pasta",
            "coffee",
            "food",
            "dinner",
            "grill",
        ],
    ),
    (
        "personal",
        &[
            "face", "hair", "baby", "diaper", "nail", "polish", "carpet", "stains", "clothes",
            "weight", "scissors", "pencil",
        ],
    ),
    (
        "finance",
        &[
            "credit", "score", "taxes", "money", "online", "divorce", "card", "price", "cost",
        ],
    ),
    (
        "travel",
        &[
            "tire", "car", "train", "plane", "station", "city", "travel", "weather", "sky", "flat",
        ],
    ),
];

fn main() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/toy");
    let mut vocab = BTreeSet::new();
    for name in [
        "kb.tsv",
        "templates.tsv",
        "suggestions.txt",
        "lm_corpus.txt",
    ] {
        let text = fs::read_to_string(root.join(name)).expect("toy data file");
        for line in text.lines().filter(|l| !l.starts_with('#')) {
            for field in line.split('\t') {
                vocab.extend(tokens(field).into_iter().filter(|t| !t.contains('#')));
            }
        }
    }
    for (_, words) in TOPICS {
        vocab.extend(words.iter().map(|w| w.to_string()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(20170403);
    let unit = Normal::new(0.0, 1.0).unwrap();
    let spread = Normal::new(0.0, 0.45).unwrap();
    let background = Normal::new(0.0, 0.3).unwrap();
    let centres: Vec<Vec<f64>> = TOPICS
        .iter()
        .map(|_| (0..DIM).map(|_| unit.sample(&mut rng)).collect())
        .collect();

    let mut table = EmbeddingTable::new(DIM).unwrap();
    for word in &vocab {
        let topic = TOPICS
            .iter()
            .position(|(_, ws)| ws.contains(&word.as_str()));
        let v: Vec<f64> = match topic {
            Some(t) => centres[t]
                .iter()
                .map(|c| c + spread.sample(&mut rng))
                .collect(),
            None => (0..DIM).map(|_| background.sample(&mut rng)).collect(),
        };
        let v = v.into_iter().map(|x| (x * 1e6).round() / 1e6).collect();
        table.insert(word, v).unwrap();
    }
    let out = root.join("embeddings.txt");
    table.save(&out).unwrap();
    println!("wrote {} vectors to {}", table.len(), out.display());
}
