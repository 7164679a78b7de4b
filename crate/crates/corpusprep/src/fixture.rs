//! Deterministic synthetic corpus generation.
//!
//! Real source corpora for the eleven languages cannot ship with the
//! repository, so tests and demos run against generated text instead. The
//! generator composes sentences from per-language inventories (function
//! words plus agglutinative prefix/stem/suffix tables for the Bantu
//! languages), then layers on the noise the pipeline must handle: HTML
//! markup, PII strings, out-of-set languages, templated junk, and planted
//! exact/near duplicates. Everything is a pure function of the seed.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::hash::{mix64, SplitMix64};
use crate::model::Lang;

/// Per-language word tables used by the sentence generator.
pub mod inventory {
    use super::*;

    pub struct LangInventory {
        pub function_words: &'static [&'static str],
        pub noun_prefixes: &'static [&'static str],
        pub noun_stems: &'static [&'static str],
        pub verb_prefixes: &'static [&'static str],
        pub verb_stems: &'static [&'static str],
        pub verb_suffixes: &'static [&'static str],
        /// Standalone content words (used heavily for afr/eng, lightly for
        /// the Bantu languages).
        pub plain_words: &'static [&'static str],
    }

    macro_rules! words {
        ($($w:literal)+) => { &[$($w),+] };
    }

    static AFR: LangInventory = LangInventory {
        function_words: words!("die" "en" "van" "het" "nie" "is" "in" "op" "vir" "met" "aan" "om"
            "dat" "se" "sy" "hy" "ons" "hulle" "wat" "word" "was" "deur" "ook" "maar" "soos" "tot"
            "uit" "oor" "na" "by" "as" "baie" "daar" "kan" "sal" "moet" "nog" "net" "toe"),
        noun_prefixes: &[],
        noun_stems: &[],
        verb_prefixes: &[],
        verb_stems: &[],
        verb_suffixes: &[],
        plain_words: words!("mense" "kinders" "skool" "werk" "huis" "water" "geld" "stad" "land"
            "regering" "polisie" "boek" "vrou" "man" "dag" "jaar" "tyd" "nuwe" "groot" "klein"
            "goeie" "lang" "sterk" "maak" "sien" "praat" "leer" "woon" "speel" "skryf" "lees"
            "koop" "verkoop" "bou" "begin" "help" "vind" "gee" "neem" "bring" "dink" "weet" "glo"
            "hoop" "loop" "kom" "gaan" "gemaak" "gesien" "gepraat" "geleer" "gewoon" "geskryf"
            "gelees" "gekoop" "gebou" "begroting" "vergadering" "verslag" "projek" "gemeenskap"
            "universiteit" "hospitaal" "biblioteek" "onderwyser" "leerders" "boere" "plaas"
            "reën" "winter" "somer" "môre" "aand" "week" "maand" "provinsie" "dorp" "straat"
            "motor" "trein" "lughawe" "besigheid" "maatskappy" "ekonomie" "verkiesing" "wet"
            "hof" "regter" "dokter" "verpleegster" "musiek" "kuns" "geskiedenis" "wetenskap"),
    };

    static ENG: LangInventory = LangInventory {
        function_words: words!("the" "of" "and" "to" "in" "a" "is" "was" "for" "that" "with" "on"
            "as" "are" "at" "by" "this" "have" "from" "or" "had" "not" "but" "what" "all" "were"
            "when" "we" "there" "been" "their" "which" "will" "would" "can" "more" "if" "about"
            "who" "one" "they" "than" "then" "so" "some"),
        noun_prefixes: &[],
        noun_stems: &[],
        verb_prefixes: &[],
        verb_stems: &[],
        verb_suffixes: &[],
        plain_words: words!("people" "children" "school" "work" "house" "water" "money" "city"
            "country" "government" "police" "book" "woman" "man" "day" "year" "time" "new"
            "great" "small" "good" "long" "own" "strong" "make" "see" "speak" "learn" "live"
            "play" "write" "read" "buy" "sell" "build" "begin" "help" "find" "give" "take"
            "bring" "think" "know" "believe" "hope" "walk" "come" "made" "seen" "spoken"
            "learned" "lived" "played" "written" "reading" "buying" "selling" "building"
            "beginning" "helping" "finding" "giving" "taking" "bringing" "thinking" "knowing"
            "budget" "meeting" "report" "project" "community" "university" "hospital" "library"
            "teacher" "learners" "farmers" "farm" "rain" "winter" "summer" "morning" "evening"
            "week" "month" "province" "town" "street" "vehicle" "train" "airport" "business"
            "company" "economy" "election" "law" "court" "judge" "doctor" "nurse" "music" "art"
            "history" "science"),
    };

    static NBL: LangInventory = LangInventory {
        function_words: words!("begodu" "kodwana" "ngombana" "nakube" "lokha" "nje" "khulu"
            "bona" "ukuthi" "kanye" "njalo" "godu" "soke" "woke" "ngitjho" "nanyana" "namkha"
            "kwaphela" "yeke" "ngalokho"),
        noun_prefixes: words!("um" "aba" "imi" "i" "ama" "isi" "izi" "in" "iin" "u" "ubu" "uku"),
        noun_stems: words!("ntu" "ntwana" "fundo" "beregho" "khaya" "dorobha" "narha" "moya"
            "manzi" "mali" "sikhathi" "ndaba" "bizo" "philo" "kolo" "rhulumende"),
        verb_prefixes: words!("ngi" "u" "si" "ni" "ba" "ku" "li" "zi" "a" "singa"),
        verb_stems: words!("fund" "bereg" "khamb" "thand" "bon" "khulum" "hlal" "phil" "tlol"
            "dlal" "lalel" "vum" "qal" "lim" "thum"),
        verb_suffixes: words!("a" "ile" "isa" "eka" "ela" "ana" "wa" "eni"),
        plain_words: words!("kuhle" "komunye" "esikolweni" "emsebenzini" "ekhaya" "endaweni"
            "abantu" "umuntu" "ilizwe" "idorobha" "imali" "amanzi"),
    };

    static NSO: LangInventory = LangInventory {
        function_words: words!("gore" "le" "ga" "go" "ka" "ke" "se" "ba" "bja" "ya" "wa" "sa"
            "la" "kua" "fao" "mo" "bjale" "bjalo" "kudu" "gape" "gomme" "goba" "ge" "gona"
            "fela" "pele" "morago" "lehono" "eupša"),
        noun_prefixes: words!("mo" "ba" "me" "se" "di" "le" "ma" "bo" "go"),
        noun_stems: words!("tho" "ngwana" "thuto" "šomo" "gae" "toropo" "naga" "ya" "etse"
            "tšhelete" "nako" "taba" "ina" "phelo" "kolo" "mmušo"),
        verb_prefixes: words!("ke" "o" "re" "le" "ba" "e" "di" "se" "ga" "re-ka"),
        verb_stems: words!("rut" "šom" "sepel" "rat" "bon" "bolel" "phel" "dul" "ngwal" "ral"
            "thuš" "tsen" "agel" "lem" "rek"),
        verb_suffixes: words!("a" "ile" "iša" "ega" "ela" "ana" "wa" "ong"),
        plain_words: words!("batho" "motho" "sekolong" "mošomong" "gaeng" "lefelong" "meetse"
            "lefase" "polelo" "setšhaba"),
    };

    static SOT: LangInventory = LangInventory {
        function_words: words!("hore" "le" "ha" "ho" "ka" "ke" "se" "ba" "ea" "tsa" "oa" "sa"
            "la" "mo" "teng" "joale" "joalo" "haholo" "hape" "empa" "kapa" "ebe" "hobane"
            "hona" "feela" "pele" "morao" "kajeno" "hammoho"),
        noun_prefixes: words!("mo" "ba" "me" "se" "di" "le" "ma" "bo" "ho"),
        noun_stems: words!("tho" "ngwana" "thuto" "sebetsi" "hae" "toropo" "naha" "moya" "etsi"
            "chelete" "nako" "taba" "bitso" "phelo" "kolo" "mmuso"),
        verb_prefixes: words!("ke" "o" "re" "le" "ba" "e" "di" "se" "ha" "re-ka"),
        verb_stems: words!("rut" "sebets" "tsamay" "rat" "bon" "bu" "phel" "dul" "ngol" "bapal"
            "thus" "ken" "hah" "lem" "rek"),
        verb_suffixes: words!("a" "ile" "isa" "eha" "ela" "ana" "oa" "eng"),
        plain_words: words!("batho" "motho" "sekolong" "mosebetsing" "hae" "sebakeng" "metsi"
            "lefatše" "puo" "setjhaba"),
    };

    static SSW: LangInventory = LangInventory {
        function_words: words!("kutsi" "futsi" "kodvwa" "ngobe" "nangabe" "lapho" "manje"
            "kakhulu" "kuphela" "njalo" "kanye" "nome" "kantsi" "phindze" "kepha" "khona"
            "bese" "ngako" "lapha" "kuze"),
        noun_prefixes: words!("um" "ba" "imi" "li" "ema" "si" "ti" "in" "tin" "lu" "bu" "ku"),
        noun_stems: words!("ntfu" "ntfwana" "fundvo" "sebenti" "khaya" "dolobha" "ve" "moya"
            "nti" "mali" "sikhatsi" "ndzaba" "bito" "philo" "kolwa" "hulumende"),
        verb_prefixes: words!("ngi" "u" "si" "ni" "ba" "ku" "li" "ti" "a" "singa"),
        verb_stems: words!("fundz" "sebent" "hamb" "tsandz" "bon" "khulum" "hlal" "phil" "bhal"
            "dlal" "lalel" "vum" "cal" "lim" "tfum"),
        verb_suffixes: words!("a" "ile" "isa" "eka" "ela" "ana" "wa" "eni"),
        plain_words: words!("bantfu" "umuntfu" "esikolweni" "emsebentini" "ekhaya" "endzaweni"
            "emanti" "live" "lulwimi" "sive"),
    };

    static TSN: LangInventory = LangInventory {
        function_words: words!("gore" "le" "ga" "go" "ka" "ke" "se" "ba" "ya" "wa" "sa" "la"
            "mo" "teng" "jaanong" "jaaka" "thata" "gape" "mme" "kgotsa" "fa" "gonne" "gona"
            "fela" "pele" "morago" "gompieno" "mmogo"),
        noun_prefixes: words!("mo" "ba" "me" "se" "di" "le" "ma" "bo" "go"),
        noun_stems: words!("tho" "ngwana" "thuto" "tiro" "gae" "toropo" "naga" "mowa" "etsi"
            "madi" "nako" "kgang" "ina" "botshelo" "kolo" "puso"),
        verb_prefixes: words!("ke" "o" "re" "lo" "ba" "e" "di" "se" "ga" "re-ka"),
        verb_stems: words!("rut" "dir" "tsamay" "rat" "bon" "bu" "tshel" "nn" "kwal" "tshamek"
            "thus" "tsen" "ag" "lem" "rek"),
        verb_suffixes: words!("a" "ile" "isa" "ega" "ela" "ana" "wa" "eng"),
        plain_words: words!("batho" "motho" "sekolong" "tirong" "gae" "lefelong" "metsi"
            "lefatshe" "puo" "setšhaba"),
    };

    static TSO: LangInventory = LangInventory {
        function_words: words!("leswaku" "naswona" "kambe" "hikuva" "loko" "laha" "sweswi"
            "ngopfu" "ntsena" "nakambe" "kumbe" "kutani" "xana" "kasi" "hinkwavo" "hinkwaswo"
            "ndzhaku" "mahlweni" "namuntlha" "swinene"),
        noun_prefixes: words!("mu" "va" "mi" "xi" "swi" "ri" "ma" "vu" "ku" "ti"),
        noun_stems: words!("nhu" "nwana" "dyondzo" "ntirho" "kaya" "doroba" "tiko" "moya"
            "mati" "mali" "nkarhi" "mhaka" "vito" "hanyo" "kolo" "mfumo"),
        verb_prefixes: words!("ndzi" "u" "hi" "mi" "va" "wu" "yi" "ri" "xi" "swi"),
        verb_stems: words!("dyondz" "tirh" "famb" "rhandz" "von" "vulavul" "hany" "tsham"
            "tsal" "tlang" "pfun" "nghen" "ak" "rim" "xav"),
        verb_suffixes: words!("a" "ile" "isa" "eka" "ela" "ana" "iwa" "eni"),
        plain_words: words!("vanhu" "munhu" "exikolweni" "entirhweni" "ekaya" "endhawini"
            "matimba" "misava" "ririmi" "rixaka"),
    };

    static VEN: LangInventory = LangInventory {
        function_words: words!("uri" "na" "fhedzi" "ngauri" "musi" "henefho" "zwino" "vhukuma"
            "hafhu" "kana" "nahone" "ngauralo" "tshifhinga" "namusi" "murahu" "ndi" "khou"
            "nga" "kha" "ha"),
        noun_prefixes: words!("mu" "vha" "mi" "tshi" "zwi" "ḽi" "ma" "vhu" "u" "dzi"),
        noun_stems: words!("thu" "ṅwana" "pfunzo" "shumo" "haya" "ḓorobo" "shango" "muya"
            "ḓi" "tshelede" "nḓila" "fhungo" "dzina" "tshilo" "kolo" "vhuso"),
        verb_prefixes: words!("ndi" "u" "ri" "ni" "vha" "i" "ḽi" "tshi" "zwi" "dzi"),
        verb_stems: words!("gud" "shum" "tshimbil" "fun" "vhon" "amb" "tshil" "dzul" "ṅwal"
            "tamb" "thus" "dzhen" "fhaṱ" "lim" "reng"),
        verb_suffixes: words!("a" "ile" "isa" "ea" "ela" "ana" "iwa" "oni"),
        plain_words: words!("vhathu" "muthu" "tshikoloni" "mushumoni" "hayani" "fhethuni"
            "maḓi" "ḽifhasi" "luambo" "lushaka"),
    };

    static XHO: LangInventory = LangInventory {
        function_words: words!("ukuba" "kwaye" "kodwa" "kuba" "xa" "apho" "ngoku" "kakhulu"
            "kuphela" "njalo" "kunye" "okanye" "nokuba" "oku" "kwakhona" "emva" "phambili"
            "namhlanje" "ke" "ngoko"),
        noun_prefixes: words!("um" "aba" "imi" "i" "ama" "isi" "izi" "in" "iin" "u" "ulu" "uku"),
        noun_stems: words!("ntu" "ntwana" "fundo" "sebenzi" "khaya" "dolophu" "lizwe" "moya"
            "manzi" "mali" "xesha" "ndaba" "gama" "philo" "kolo" "rhulumente"),
        verb_prefixes: words!("ndi" "u" "si" "ni" "ba" "ku" "li" "zi" "a" "singa"),
        verb_stems: words!("fund" "sebenz" "hamb" "thand" "bon" "thet" "hlal" "phil" "bhal"
            "dlal" "qond" "cing" "xel" "qal" "xhas" "cel"),
        verb_suffixes: words!("a" "ile" "isa" "eka" "ela" "ana" "wa" "ini"),
        plain_words: words!("abantu" "umntu" "esikolweni" "emsebenzini" "ekhaya" "kwindawo"
            "amanzi" "ilizwe" "ulwimi" "isizwe"),
    };

    static ZUL: LangInventory = LangInventory {
        function_words: words!("ukuthi" "futhi" "kodwa" "ngoba" "uma" "lapho" "manje" "kakhulu"
            "kuphela" "njalo" "kanye" "noma" "nokuthi" "lokhu" "phinde" "emva" "phambili"
            "namuhla" "ngakho" "kanti"),
        noun_prefixes: words!("um" "aba" "imi" "i" "ama" "isi" "izi" "in" "izin" "u" "ulu" "uku"),
        noun_stems: words!("ntu" "ntwana" "fundo" "sebenzi" "khaya" "dolobha" "zwe" "moya"
            "manzi" "mali" "sikhathi" "ndaba" "gama" "philo" "kolo" "hulumeni"),
        verb_prefixes: words!("ngi" "u" "si" "ni" "ba" "ku" "li" "zi" "a" "singa"),
        verb_stems: words!("fund" "sebenz" "hamb" "thand" "bon" "khulum" "hlal" "phil" "bhal"
            "dlal" "cabang" "zam" "lalel" "vum" "qal"),
        verb_suffixes: words!("a" "ile" "isa" "eka" "ela" "ana" "wa" "eni"),
        plain_words: words!("abantu" "umuntu" "esikoleni" "emsebenzini" "ekhaya" "endaweni"
            "amanzi" "izwe" "ulimi" "isizwe"),
    };

    pub fn get(lang: Lang) -> &'static LangInventory {
        match lang {
            Lang::Afr => &AFR,
            Lang::Eng => &ENG,
            Lang::Nbl => &NBL,
            Lang::Nso => &NSO,
            Lang::Sot => &SOT,
            Lang::Ssw => &SSW,
            Lang::Tsn => &TSN,
            Lang::Tso => &TSO,
            Lang::Ven => &VEN,
            Lang::Xho => &XHO,
            Lang::Zul => &ZUL,
        }
    }

    fn pick<'a>(rng: &mut SplitMix64, items: &[&'a str]) -> &'a str {
        items[rng.next_below(items.len() as u64) as usize]
    }

    /// Proper-noun-like tokens (people, places) built from syllables.
    /// Names recur across languages the way real news names do, and their
    /// long tail keeps the byte-pair vocabulary well fed.
    fn name_word(rng: &mut SplitMix64) -> String {
        const SYLLABLES: [&str; 28] = [
            "ma", "tha", "ndi", "lo", "ka", "zi", "bo", "nga", "le", "si", "tu", "we", "du",
            "mo", "la", "pe", "kho", "ra", "vu", "ta", "se", "li", "me", "nko", "fu", "ya",
            "hla", "tshe",
        ];
        let n = 2 + rng.next_below(3);
        let mut name = String::new();
        for _ in 0..n {
            name.push_str(SYLLABLES[rng.next_below(SYLLABLES.len() as u64) as usize]);
        }
        capitalize(&name)
    }

    fn number_word(rng: &mut SplitMix64) -> String {
        match rng.next_below(4) {
            0 => format!("{}", 1900 + rng.next_below(130)),
            1 => format!("{}", rng.next_below(100_000)),
            2 => format!("R{}", 10 + rng.next_below(9_990)),
            _ => format!("{}%", 1 + rng.next_below(99)),
        }
    }

    /// One content word: a generated noun or inflected verb for the Bantu
    /// languages, or a plain vocabulary word otherwise.
    pub(crate) fn content_word(rng: &mut SplitMix64, inv: &LangInventory) -> String {
        if inv.noun_stems.is_empty() {
            return pick(rng, inv.plain_words).to_string();
        }
        match rng.next_below(10) {
            0..=3 => {
                let mut w = String::new();
                w.push_str(pick(rng, inv.noun_prefixes));
                w.push_str(pick(rng, inv.noun_stems));
                w
            }
            4..=7 => {
                let mut w = String::new();
                w.push_str(pick(rng, inv.verb_prefixes));
                w.push_str(pick(rng, inv.verb_stems));
                w.push_str(pick(rng, inv.verb_suffixes));
                w
            }
            _ => pick(rng, inv.plain_words).to_string(),
        }
    }

    fn capitalize(word: &str) -> String {
        let mut chars = word.chars();
        match chars.next() {
            Some(c) => c.to_uppercase().collect::<String>() + chars.as_str(),
            None => String::new(),
        }
    }

    /// A sentence of `min..=max` words with function words interleaved,
    /// occasional numbers and commas, capitalized, punctuated.
    pub(crate) fn sentence(rng: &mut SplitMix64, lang: Lang, min: u64, max: u64) -> String {
        let inv = get(lang);
        let n_words = min + rng.next_below(max - min + 1);
        let mut words: Vec<String> = Vec::with_capacity(n_words as usize);
        for i in 0..n_words {
            // Roughly 40% function words, never leading; names and numbers
            // sprinkle in the way news text carries them.
            let roll = rng.next_below(100);
            if roll < 40 && i != 0 {
                words.push(pick(rng, inv.function_words).to_string());
            } else if roll < 45 {
                words.push(name_word(rng));
            } else if roll < 49 {
                words.push(number_word(rng));
            } else {
                words.push(content_word(rng, inv));
            }
        }
        if words.len() > 5 && rng.next_below(3) == 0 {
            let at = 2 + rng.next_below(words.len() as u64 - 4) as usize;
            words[at] = format!("{},", words[at]);
        }
        let mut s = words.join(" ");
        s = capitalize(&s);
        s.push(match rng.next_below(12) {
            0 => '?',
            1 => '!',
            _ => '.',
        });
        s
    }

    /// Clean monolingual sentences for classifier training and evaluation.
    pub fn seed_sentences(lang: Lang, count: usize, seed: u64) -> Vec<String> {
        let mut rng = SplitMix64::new(mix64(seed ^ (lang.index() as u64 + 1).wrapping_mul(0x5EED)));
        (0..count).map(|_| sentence(&mut rng, lang, 8, 16)).collect()
    }

    /// Like `seed_sentences` but padded out to a minimum character length.
    pub fn long_sentences(lang: Lang, count: usize, min_chars: usize, seed: u64) -> Vec<String> {
        let mut rng = SplitMix64::new(mix64(seed ^ (lang.index() as u64 + 7).wrapping_mul(0x10E6)));
        (0..count)
            .map(|_| {
                let mut s = sentence(&mut rng, lang, 10, 18);
                while s.chars().count() < min_chars {
                    s.pop();
                    s.push(' ');
                    s.push_str(&sentence(&mut rng, lang, 8, 14).to_lowercase());
                }
                s
            })
            .collect()
    }
}

/// Sentences in languages outside the target set, for rejection tests.
pub const FRENCH_SENTENCES: [&str; 12] = [
    "Le gouvernement annonce une nouvelle politique culturelle pour les régions.",
    "Les enfants jouent dans le jardin pendant toute la journée d'été.",
    "La bibliothèque municipale ouvre ses portes demain matin à neuf heures.",
    "Nous avons visité le musée avec nos amis pendant les vacances.",
    "Le train arrive à la gare centrale avec quelques minutes de retard.",
    "Elle prépare le dîner pendant que son frère termine ses devoirs.",
    "Les agriculteurs attendent la pluie depuis le début du printemps.",
    "Cette université propose des cours de langues et de sciences humaines.",
    "Le marché du samedi attire beaucoup de monde dans le centre-ville.",
    "Ils construisent un nouveau pont au-dessus de la rivière principale.",
    "Le médecin conseille de boire beaucoup d'eau pendant les fortes chaleurs.",
    "La chanteuse donnera un concert exceptionnel à la fin du mois.",
];

pub const GERMAN_SENTENCES: [&str; 8] = [
    "Die Regierung kündigt eine neue Kulturpolitik für die Regionen an.",
    "Die Kinder spielen den ganzen Sommertag im Garten hinter dem Haus.",
    "Die Stadtbibliothek öffnet morgen früh um neun Uhr ihre Türen.",
    "Wir haben das Museum mit unseren Freunden in den Ferien besucht.",
    "Der Zug kommt mit einigen Minuten Verspätung am Hauptbahnhof an.",
    "Die Bauern warten seit dem Frühlingsanfang auf den Regen.",
    "Diese Universität bietet Kurse in Sprachen und Geisteswissenschaften an.",
    "Der Samstagsmarkt zieht viele Menschen in die Innenstadt.",
];

/// Knobs for the synthetic corpus. Rates are per-document probabilities.
#[derive(Debug, Clone)]
pub struct FixtureOptions {
    pub seed: u64,
    /// Approximate total size of raw text across all sources, in bytes.
    pub total_bytes: u64,
    pub exact_dup_rate: f64,
    pub near_dup_rate: f64,
    pub foreign_rate: f64,
    pub html_rate: f64,
    pub pii_rate: f64,
    pub templated_rate: f64,
    /// Sentences per seed file for classifier training.
    pub seed_sentences_per_lang: usize,
}

impl Default for FixtureOptions {
    fn default() -> Self {
        FixtureOptions {
            seed: 0xC0FFEE,
            total_bytes: 50 * 1024 * 1024,
            exact_dup_rate: 0.02,
            near_dup_rate: 0.02,
            foreign_rate: 0.015,
            html_rate: 0.10,
            pii_rate: 0.03,
            templated_rate: 0.01,
            seed_sentences_per_lang: 400,
        }
    }
}

/// Language weights matching the skew of the real source mix: Afrikaans
/// and English dominate, the smaller Bantu languages trail far behind.
const LANG_WEIGHTS: [(Lang, u64); 11] = [
    (Lang::Afr, 420),
    (Lang::Eng, 310),
    (Lang::Zul, 120),
    (Lang::Xho, 80),
    (Lang::Sot, 50),
    (Lang::Tsn, 40),
    (Lang::Nso, 30),
    (Lang::Tso, 12),
    (Lang::Ssw, 8),
    (Lang::Ven, 6),
    (Lang::Nbl, 4),
];

fn weighted_lang(rng: &mut SplitMix64) -> Lang {
    let total: u64 = LANG_WEIGHTS.iter().map(|(_, w)| w).sum();
    let mut roll = rng.next_below(total);
    for (lang, w) in LANG_WEIGHTS {
        if roll < w {
            return lang;
        }
        roll -= w;
    }
    Lang::Afr
}

/// A generated document before serialization.
#[derive(Debug, Clone)]
pub struct GeneratedDoc {
    pub lang: Option<Lang>,
    pub text: String,
}

/// Builds one clean multi-paragraph document.
fn clean_document(rng: &mut SplitMix64, lang: Lang, min_words: u64) -> String {
    let mut paragraphs = Vec::new();
    let mut words = 0u64;
    while words < min_words {
        let n_sentences = 2 + rng.next_below(6);
        let mut sentences = Vec::with_capacity(n_sentences as usize);
        for _ in 0..n_sentences {
            let s = inventory::sentence(rng, lang, 6, 18);
            words += s.split_whitespace().count() as u64;
            sentences.push(s);
        }
        paragraphs.push(sentences.join(" "));
    }
    paragraphs.join("\n\n")
}

fn foreign_document(rng: &mut SplitMix64) -> String {
    let pool: &[&str] = if rng.next_below(3) == 0 {
        &GERMAN_SENTENCES
    } else {
        &FRENCH_SENTENCES
    };
    let n = 4 + rng.next_below(8);
    let mut out = Vec::with_capacity(n as usize);
    for _ in 0..n {
        out.push(pool[rng.next_below(pool.len() as u64) as usize]);
    }
    out.join("\n")
}

fn templated_document(rng: &mut SplitMix64, lang: Lang) -> String {
    let line = inventory::sentence(rng, lang, 4, 7);
    vec![line; 20 + rng.next_below(40) as usize].join("\n")
}

fn wrap_html(rng: &mut SplitMix64, text: &str) -> String {
    let mut out = String::from("<html><body>");
    for para in text.split("\n\n") {
        match rng.next_below(4) {
            0 => out.push_str(&format!("<div class=\"content\">{para}</div>")),
            1 => out.push_str(&format!("<p>{}</p>", para.replace(' ', "&nbsp;"))),
            _ => out.push_str(&format!("<p>{para}</p>")),
        }
    }
    if rng.next_below(3) == 0 {
        out.push_str("<script>var tracker = load();</script>");
    }
    out.push_str("</body></html>");
    out
}

fn inject_pii(rng: &mut SplitMix64, text: &str) -> String {
    let snippets = [
        "kontak jan.smith@example.co.za vir inligting",
        "bel +27 82 555 1234 gedurende kantoorure",
        "faks na 011 555 9876 voor vrydag",
        "epos info@voorbeeld.org.za asseblief",
        "ID 8001015009087 moet saamgebring word",
    ];
    let mut out = text.to_string();
    let n = 1 + rng.next_below(2);
    for _ in 0..n {
        out.push(' ');
        out.push_str(snippets[rng.next_below(snippets.len() as u64) as usize]);
        out.push('.');
    }
    out
}

/// Mutates roughly one word per `1/rate` into a near-duplicate of `text`.
fn near_duplicate(rng: &mut SplitMix64, text: &str, lang: Lang) -> String {
    let inv = inventory::get(lang);
    let mut words: Vec<String> = text.split_whitespace().map(String::from).collect();
    if words.len() < 20 {
        return text.to_string();
    }
    // One substitution per ~150 words keeps shingle Jaccard above 0.9.
    let edits = (words.len() / 150).max(1);
    for _ in 0..edits {
        let at = rng.next_below(words.len() as u64) as usize;
        words[at] = inventory::content_word(rng, inv);
    }
    words.join(" ")
}

#[derive(Debug, Clone, Serialize)]
pub struct FixtureSummary {
    pub manifest_path: PathBuf,
    pub seed_dir: PathBuf,
    pub total_docs: u64,
    pub total_bytes: u64,
    pub foreign_docs: u64,
    pub exact_dups: u64,
    pub near_dups: u64,
}

#[derive(Serialize)]
struct JsonlRecord<'a> {
    text: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    lang: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    url: Option<String>,
}

/// Generates the on-disk fixture: sharded raw sources, a run manifest,
/// and per-language seed text for classifier training.
pub fn generate_corpus(dir: &Path, opts: &FixtureOptions) -> std::io::Result<FixtureSummary> {
    let sources_dir = dir.join("sources");
    let seed_dir = dir.join("seed");
    fs::create_dir_all(&sources_dir)?;
    fs::create_dir_all(&seed_dir)?;

    let mut rng = SplitMix64::new(mix64(opts.seed ^ 0xF1C7));
    let mut summary = FixtureSummary {
        manifest_path: dir.join("manifest.json"),
        seed_dir: seed_dir.clone(),
        total_docs: 0,
        total_bytes: 0,
        foreign_docs: 0,
        exact_dups: 0,
        near_dups: 0,
    };

    // wura: JSONL with a declared lang field; mc4: JSONL with url but no
    // lang, carrying most of the noise; nchlt: blank-line plain text.
    let wura_budget = opts.total_bytes * 45 / 100;
    let mc4_budget = opts.total_bytes * 45 / 100;
    let nchlt_budget = opts.total_bytes * 10 / 100;

    let mut recent: Vec<(Lang, String)> = Vec::new();

    let make_doc = |rng: &mut SplitMix64,
                        summary: &mut FixtureSummary,
                        recent: &mut Vec<(Lang, String)>,
                        allow_noise: bool|
     -> GeneratedDoc {
        summary.total_docs += 1;
        if allow_noise {
            let roll = rng.next_f64();
            if roll < opts.foreign_rate {
                summary.foreign_docs += 1;
                return GeneratedDoc {
                    lang: None,
                    text: foreign_document(rng),
                };
            }
            if roll < opts.foreign_rate + opts.exact_dup_rate && !recent.is_empty() {
                summary.exact_dups += 1;
                let (lang, text) = recent[rng.next_below(recent.len() as u64) as usize].clone();
                return GeneratedDoc {
                    lang: Some(lang),
                    text,
                };
            }
            if roll < opts.foreign_rate + opts.exact_dup_rate + opts.near_dup_rate
                && !recent.is_empty()
            {
                summary.near_dups += 1;
                let (lang, text) = recent[rng.next_below(recent.len() as u64) as usize].clone();
                return GeneratedDoc {
                    lang: Some(lang),
                    text: near_duplicate(rng, &text, lang),
                };
            }
            if roll < opts.foreign_rate + opts.exact_dup_rate + opts.near_dup_rate + opts.templated_rate
            {
                let lang = weighted_lang(rng);
                return GeneratedDoc {
                    lang: Some(lang),
                    text: templated_document(rng, lang),
                };
            }
        }
        let lang = weighted_lang(rng);
        let min_words = 60 + rng.next_below(400);
        let mut text = clean_document(rng, lang, min_words);
        if allow_noise {
            if rng.next_f64() < opts.pii_rate {
                text = inject_pii(rng, &text);
            }
            if recent.len() < 500 {
                recent.push((lang, text.clone()));
            };
            if rng.next_f64() < opts.html_rate {
                text = wrap_html(rng, &text);
            }
        }
        GeneratedDoc {
            lang: Some(lang),
            text,
        }
    };

    // -- wura + mc4: sharded JSONL ------------------------------------------
    for (name, budget, with_lang, noisy) in [
        ("wura", wura_budget, true, true),
        ("mc4", mc4_budget, false, true),
    ] {
        let src_dir = sources_dir.join(name);
        fs::create_dir_all(&src_dir)?;
        let mut written = 0u64;
        let mut shard_idx = 0u32;
        'outer: loop {
            let path = src_dir.join(format!("shard-{shard_idx:03}.jsonl"));
            let mut w = std::io::BufWriter::new(fs::File::create(&path)?);
            let mut shard_bytes = 0u64;
            while shard_bytes < 4 * 1024 * 1024 {
                let doc = make_doc(&mut rng, &mut summary, &mut recent, noisy);
                let record = JsonlRecord {
                    text: &doc.text,
                    lang: if with_lang {
                        doc.lang.map(|l| l.iso_code())
                    } else {
                        None
                    },
                    url: if name == "mc4" {
                        Some(format!("https://example.org/{}/{}", name, summary.total_docs))
                    } else {
                        None
                    },
                };
                let line = serde_json::to_string(&record).expect("record serializes");
                writeln!(w, "{line}")?;
                shard_bytes += line.len() as u64 + 1;
                written += line.len() as u64 + 1;
                if written >= budget {
                    w.flush()?;
                    summary.total_bytes += written;
                    break 'outer;
                }
            }
            w.flush()?;
            shard_idx += 1;
        }
    }

    // -- nchlt: clean plain text, blank-line separated -----------------------
    let nchlt_dir = sources_dir.join("nchlt");
    fs::create_dir_all(&nchlt_dir)?;
    {
        let path = nchlt_dir.join("corpus-000.txt");
        let mut w = std::io::BufWriter::new(fs::File::create(&path)?);
        let mut written = 0u64;
        while written < nchlt_budget {
            let lang = weighted_lang(&mut rng);
            let min_words = 80 + rng.next_below(200);
            let text = clean_document(&mut rng, lang, min_words);
            // Paragraphs belong to one doc; blank lines separate docs, so
            // flatten inner paragraph breaks.
            let flat = text.replace("\n\n", "\n");
            writeln!(w, "{flat}")?;
            writeln!(w)?;
            written += flat.len() as u64 + 2;
            summary.total_docs += 1;
        }
        w.flush()?;
        summary.total_bytes += written;
    }

    // -- langid seed text -----------------------------------------------------
    for lang in Lang::ALL {
        let path = seed_dir.join(format!("{}.txt", lang.iso_code()));
        let sentences = inventory::seed_sentences(
            lang,
            opts.seed_sentences_per_lang,
            mix64(opts.seed ^ 0x5EED_DA7A),
        );
        fs::write(&path, sentences.join("\n"))?;
    }

    // -- run manifest ----------------------------------------------------------
    let manifest = serde_json::json!({
        "seed": opts.seed,
        "output_dir": dir.join("out"),
        "sources": [
            {
                "name": "wura",
                "format": "jsonl",
                "paths": [sources_dir.join("wura")],
            },
            {
                "name": "mc4",
                "format": "jsonl",
                "paths": [sources_dir.join("mc4")],
            },
            {
                "name": "nchlt",
                "format": "text",
                "paths": [sources_dir.join("nchlt")],
            },
        ],
    });
    fs::write(
        &summary.manifest_path,
        serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;

    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clean::{structural_check, CleaningConfig};
    use crate::model::count_words;

    #[test]
    fn seed_sentences_are_deterministic() {
        let a = inventory::seed_sentences(Lang::Zul, 5, 42);
        let b = inventory::seed_sentences(Lang::Zul, 5, 42);
        assert_eq!(a, b);
        let c = inventory::seed_sentences(Lang::Zul, 5, 43);
        assert_ne!(a, c);
    }

    #[test]
    fn generated_docs_mostly_pass_structural_checks() {
        let cfg = CleaningConfig::default();
        let mut rng = SplitMix64::new(7);
        let mut passed = 0;
        let total = 200;
        for i in 0..total {
            let lang = Lang::ALL[i % 11];
            let doc = clean_document(&mut rng, lang, 120);
            if structural_check(&doc, &cfg).is_none() {
                passed += 1;
            }
        }
        assert!(passed as f64 / total as f64 > 0.95, "only {passed}/{total} passed");
    }

    #[test]
    fn long_sentences_meet_length_floor() {
        for s in inventory::long_sentences(Lang::Nbl, 20, 100, 9) {
            assert!(s.chars().count() >= 100);
        }
    }

    #[test]
    fn near_duplicate_changes_few_words() {
        let mut rng = SplitMix64::new(11);
        let original = clean_document(&mut rng, Lang::Afr, 300);
        let dup = near_duplicate(&mut rng, &original, Lang::Afr);
        let a: Vec<&str> = original.split_whitespace().collect();
        let b: Vec<&str> = dup.split_whitespace().collect();
        assert_eq!(a.len(), b.len());
        let changed = a.iter().zip(&b).filter(|(x, y)| x != y).count();
        assert!(changed >= 1 && changed <= 5, "changed {changed}");
        assert!(count_words(&dup) == count_words(&original));
    }
}
