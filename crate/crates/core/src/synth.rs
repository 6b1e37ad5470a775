//! Deterministic synthetic corpora.
//!
//! [`department_corpus`] builds a 75-course, 742-response department: seven
//! single-respondent courses, one course with 44 responses and the rest
//! between 3 and 29, with English, Danish and mixed comments.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{CourseBundle, EvaluationResponse};

pub const DEPARTMENT_COURSES: usize = 75;
pub const DEPARTMENT_RESPONSES: usize = 742;
pub const DEPARTMENT_SINGLETONS: usize = 7;
pub const DEPARTMENT_MAX: usize = 44;

const LECTURERS: [&str; 12] = [
    "Anna Hansen",
    "Mikkel Jensen",
    "Sofie Nielsen",
    "Lars Pedersen",
    "Ida Christensen",
    "Jonas Larsen",
    "Freja Andersen",
    "Emil Sørensen",
    "Clara Rasmussen",
    "Oliver Madsen",
    "Maja Kristensen",
    "Noah Olsen",
];

const ENGLISH: [&str; 16] = [
    "The lectures were well structured and the slides helped a lot.",
    "The workload was excessive compared to the ECTS of the course.",
    "I liked the online teaching format because I could rewatch recordings.",
    "I did not like online teaching, it was hard to stay focused.",
    "Exercises were good but solutions came out too late.",
    "The exam matched the exercises we practiced during the semester.",
    "Group work was confusing because the project description kept changing.",
    "Feedback on hand-ins was slow and often too brief.",
    "More worked examples in the lectures would help understanding.",
    "The book is structured nicely and the chapters follow the lectures.",
    "The pace in the second half of the course was too fast.",
    "Slides were uploaded late, which made preparation difficult.",
    "Supervision was helpful whenever our group got stuck.",
    "The programming assignments were great practice for the exam.",
    "Instructions for the mini project were unclear at times.",
    "The teaching assistants were super helpful during exercise sessions.",
];

const DANISH: [&str; 10] = [
    "Det er et godt kursus og forelæsningerne er gode.",
    "Opgaverne er ikke svære, men der er mange af dem.",
    "Det var svært at følge med i slides og det gik for hurtigt.",
    "Eksamen er fair og det er tydeligt hvad der forventes.",
    "Gruppearbejdet fungerede ikke og det var frustrerende.",
    "Det er fint at have online undervisning, men ikke hele tiden.",
    "Der er for meget læsning til hver forelæsning.",
    "Øvelserne hjælper og det er godt at der er hjælpelærere.",
    "Det er håbløst at finde materialet på Moodle.",
    "Kurset er relevant og det er spændende emner.",
];

const MIXED: [&str; 4] = [
    "Det er fint, but the exercises and the slides need to match.",
    "Forelæsningerne er gode and the exam is fair to the students.",
    "Jeg synes det er for meget, the workload is heavy at the end of the semester.",
    "The course is okay men det er ikke altid klart hvad vi skal lave.",
];

/// Course sizes for the 75-course department, in course order.
pub fn department_sizes(seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let regular = DEPARTMENT_COURSES - DEPARTMENT_SINGLETONS - 1;
    let mut sizes = vec![3usize; regular];
    let mut remaining = DEPARTMENT_RESPONSES - DEPARTMENT_SINGLETONS - DEPARTMENT_MAX - 3 * regular;
    while remaining > 0 {
        let i = rng.random_range(0..regular);
        if sizes[i] < 29 {
            sizes[i] += 1;
            remaining -= 1;
        }
    }
    sizes.extend(std::iter::repeat_n(1, DEPARTMENT_SINGLETONS));
    sizes.push(DEPARTMENT_MAX);
    sizes.shuffle(&mut rng);
    sizes
}

fn response_text(rng: &mut ChaCha8Rng, lecturer: &str) -> String {
    let roll = rng.random_range(0..100);
    let mut text = if roll < 60 {
        ENGLISH[rng.random_range(0..ENGLISH.len())].to_string()
    } else if roll < 85 {
        DANISH[rng.random_range(0..DANISH.len())].to_string()
    } else {
        MIXED[rng.random_range(0..MIXED.len())].to_string()
    };
    if rng.random_range(0..4) == 0 {
        let extra = ENGLISH[rng.random_range(0..ENGLISH.len())];
        text.push(' ');
        text.push_str(extra);
    }
    if rng.random_range(0..10) == 0 {
        let first = lecturer.split_whitespace().next().unwrap_or(lecturer);
        text.push_str(&format!(" {first} explained things really well."));
    }
    text
}

pub fn department_corpus(seed: u64) -> Vec<CourseBundle> {
    let sizes = department_sizes(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut next_id = 1;
    sizes
        .iter()
        .enumerate()
        .map(|(c, &n)| {
            let course_id = format!("CS{:03}", c + 1);
            let lecturer = LECTURERS[c % LECTURERS.len()];
            let mut bundle = CourseBundle::new(&course_id);
            bundle.roster.insert(lecturer.to_string());
            for _ in 0..n {
                let text = response_text(&mut rng, lecturer);
                bundle.responses.push(EvaluationResponse::new(
                    format!("R{next_id:04}"),
                    &course_id,
                    text,
                ));
                next_id += 1;
            }
            bundle
        })
        .collect()
}
