//! The fixed 80-class detector vocabulary, indexed by COCO class id.

pub const NUM_CLASSES: usize = 80;

pub const CLASS_NAMES: [&str; NUM_CLASSES] = [
    "person",
    "bicycle",
    "car",
    "motorcycle",
    "airplane",
    "bus",
    "train",
    "truck",
    "boat",
    "traffic_light",
    "fire_hydrant",
    "stop_sign",
    "parking_meter",
    "bench",
    "bird",
    "cat",
    "dog",
    "horse",
    "sheep",
    "cow",
    "elephant",
    "bear",
    "zebra",
    "giraffe",
    "backpack",
    "umbrella",
    "handbag",
    "tie",
    "suitcase",
    "frisbee",
    "skis",
    "snowboard",
    "sports_ball",
    "kite",
    "baseball_bat",
    "baseball_glove",
    "skateboard",
    "surfboard",
    "tennis_racket",
    "bottle",
    "wine_glass",
    "cup",
    "fork",
    "knife",
    "spoon",
    "bowl",
    "banana",
    "apple",
    "sandwich",
    "orange",
    "broccoli",
    "carrot",
    "hot_dog",
    "pizza",
    "donut",
    "cake",
    "chair",
    "couch",
    "potted_plant",
    "bed",
    "dining_table",
    "toilet",
    "tv",
    "laptop",
    "mouse",
    "remote",
    "keyboard",
    "cell_phone",
    "microwave",
    "oven",
    "toaster",
    "sink",
    "refrigerator",
    "book",
    "clock",
    "vase",
    "scissors",
    "teddy_bear",
    "hair_drier",
    "toothbrush",
];

// Older darknet label files and common misspellings.
const ALIASES: &[(&str, &str)] = &[
    ("motorbike", "motorcycle"),
    ("aeroplane", "airplane"),
    ("sofa", "couch"),
    ("pottedplant", "potted_plant"),
    ("diningtable", "dining_table"),
    ("tvmonitor", "tv"),
    ("tannis_racket", "tennis_racket"),
    ("hair_dryer", "hair_drier"),
];

pub fn class_name(id: usize) -> Option<&'static str> {
    CLASS_NAMES.get(id).copied()
}

/// Lowercases and maps spaces/hyphens to underscores, so `"traffic light"`
/// and `"traffic_light"` compare equal.
pub fn normalize_name(name: &str) -> String {
    name.trim()
        .chars()
        .map(|c| match c {
            ' ' | '-' => '_',
            c => c.to_ascii_lowercase(),
        })
        .collect()
}

pub fn class_id(name: &str) -> Option<usize> {
    let norm = normalize_name(name);
    let canonical = ALIASES
        .iter()
        .find(|(alias, _)| *alias == norm)
        .map(|(_, c)| *c)
        .unwrap_or(norm.as_str());
    CLASS_NAMES.iter().position(|c| *c == canonical)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn table_is_unique_and_complete() {
        let set: HashSet<_> = CLASS_NAMES.iter().collect();
        assert_eq!(set.len(), NUM_CLASSES);
        assert_eq!(class_name(0), Some("person"));
        assert_eq!(class_name(2), Some("car"));
        assert_eq!(class_name(80), None);
    }

    #[test]
    fn lookup_accepts_spacing_and_aliases() {
        assert_eq!(class_id("traffic light"), Some(9));
        assert_eq!(class_id("Person"), Some(0));
        assert_eq!(class_id("tvmonitor"), Some(62));
        assert_eq!(class_id("tannis_racket"), Some(38));
        assert_eq!(class_id("unicorn"), None);
    }
}
