//! Closed-class word lexicons used by the contextualization and rewrite
//! rules instead of a statistical part-of-speech tagger.

/// Prepositions that trigger object pronouns when they precede a mention.
/// "of" is handled separately by the no-pronoun rule.
pub const PREPOSITIONS: &[&str] = &[
    "about", "above", "across", "after", "against", "along", "among", "around", "at", "before",
    "behind", "below", "beneath", "beside", "between", "beyond", "by", "during", "for", "from",
    "in", "inside", "into", "near", "on", "onto", "over", "through", "to", "toward", "towards",
    "under", "until", "upon", "with", "within", "without",
];

/// Coordinating and subordinating conjunctions; "that" is handled separately.
pub const CONJUNCTIONS: &[&str] = &[
    "and", "or", "but", "nor", "so", "yet", "although", "because", "since", "unless", "whereas",
    "while",
];

/// Auxiliary verbs. A mention preceded by one of these takes a subject
/// pronoun rather than an object pronoun.
pub const AUXILIARIES: &[&str] = &[
    "am", "is", "are", "was", "were", "be", "been", "being", "do", "does", "did", "have", "has",
    "had", "will", "would", "shall", "should", "can", "could", "may", "might", "must",
];

/// Common main verbs appearing in question templates, used to detect the
/// "preceded by a non-auxiliary verb" case.
pub const MAIN_VERBS: &[&str] = &[
    "associate",
    "belongs",
    "borders",
    "call",
    "calls",
    "comprise",
    "comprises",
    "contain",
    "contains",
    "cover",
    "covers",
    "describe",
    "describes",
    "discover",
    "discovered",
    "discovers",
    "find",
    "finds",
    "follow",
    "followed",
    "follows",
    "found",
    "founded",
    "govern",
    "governs",
    "hold",
    "holds",
    "held",
    "include",
    "includes",
    "involve",
    "involves",
    "know",
    "knows",
    "lead",
    "leads",
    "led",
    "link",
    "links",
    "locate",
    "made",
    "make",
    "makes",
    "mention",
    "mentions",
    "outline",
    "outlined",
    "outlines",
    "own",
    "owns",
    "owned",
    "precede",
    "precedes",
    "produce",
    "produces",
    "represent",
    "represents",
    "rule",
    "rules",
    "ruled",
    "serve",
    "serves",
    "served",
    "speak",
    "speaks",
    "spoke",
    "surround",
    "surrounds",
    "use",
    "uses",
    "used",
    "win",
    "wins",
    "won",
    "wrote",
    "write",
    "writes",
];

/// Present-to-past conversion table: auxiliaries/copulas first, then common
/// template main verbs for do-support-free conversion.
pub const PAST_CONVERSIONS: &[(&str, &str)] = &[
    ("is", "was"),
    ("are", "were"),
    ("has", "had"),
    ("have", "had"),
    ("does", "did"),
    ("do", "did"),
    ("belongs", "belonged"),
    ("borders", "bordered"),
    ("calls", "called"),
    ("comprises", "comprised"),
    ("contains", "contained"),
    ("covers", "covered"),
    ("describes", "described"),
    ("discovers", "discovered"),
    ("finds", "found"),
    ("follows", "followed"),
    ("governs", "governed"),
    ("holds", "held"),
    ("includes", "included"),
    ("involves", "involved"),
    ("knows", "knew"),
    ("leads", "led"),
    ("lies", "lay"),
    ("links", "linked"),
    ("makes", "made"),
    ("means", "meant"),
    ("mentions", "mentioned"),
    ("owns", "owned"),
    ("precedes", "preceded"),
    ("produces", "produced"),
    ("represents", "represented"),
    ("rules", "ruled"),
    ("serves", "served"),
    ("speaks", "spoke"),
    ("surrounds", "surrounded"),
    ("takes", "took"),
    ("uses", "used"),
    ("wins", "won"),
    ("writes", "wrote"),
];

/// Words whose presence marks an accepted pronoun-coreference rewrite.
pub const PRONOUN_ACCEPT_WORDS: &[&str] = &[
    "he", "him", "it", "she", "they", "his", "its", "her", "their", "them", "hers", "theirs",
    "there",
];

/// Default label prefixes that take a definite article, used by the offline
/// determiner fallback.
pub const DEFINITE_ARTICLE_PREFIXES: &[&str] = &[
    "United",
    "Republic of",
    "Kingdom of",
    "Democratic Republic",
    "Federated States",
    "Union of",
    "Czech Republic",
    "Netherlands",
    "Philippines",
    "Bahamas",
    "Gambia",
    "Maldives",
    "Comoros",
    "Marshall Islands",
    "Solomon Islands",
    "Seychelles",
];

pub fn is_preposition(word: &str) -> bool {
    PREPOSITIONS.contains(&word.to_lowercase().as_str())
}

pub fn is_conjunction(word: &str) -> bool {
    CONJUNCTIONS.contains(&word.to_lowercase().as_str())
}

pub fn is_auxiliary(word: &str) -> bool {
    AUXILIARIES.contains(&word.to_lowercase().as_str())
}

pub fn is_main_verb(word: &str) -> bool {
    MAIN_VERBS.contains(&word.to_lowercase().as_str())
}

pub fn past_form(word: &str) -> Option<&'static str> {
    let lower = word.to_lowercase();
    PAST_CONVERSIONS
        .iter()
        .find(|(present, _)| *present == lower)
        .map(|(_, past)| *past)
}

pub fn is_pronoun_accept_word(word: &str) -> bool {
    PRONOUN_ACCEPT_WORDS.contains(&word.to_lowercase().as_str())
}
