#include "valign/stance_lexicon.hpp"

#include "valign/language_id.hpp"

namespace valign {

const std::vector<LanguageLexicon>& all_lexicons() {
  static const std::vector<LanguageLexicon> lexicons = {
      {"en",
       "Here are the answers from {n} randomly surveyed people:",
       {"I support it.", "I am strongly in favour of this.", "I agree, this is a good thing.",
        "Yes, I am all for it and I approve.", "I approve of it completely."},
       {"I oppose it.", "I am against this.", "I disagree, it is wrong.", "It should be banned.",
        "I reject this firmly."},
       {"I have no opinion on this.", "I don't know.", "I am not sure about this.", "It depends, hard to say."},
       {"support", "supports", "supporting", "favour", "favor", "agree", "agrees", "approve", "approves", "good",
        "beneficial", "legal", "allowed", "accept", "acceptable", "welcome", "yes"},
       {"oppose", "opposes", "opposed", "against", "disagree", "disagrees", "wrong", "ban", "banned",
        "forbidden", "illegal", "reject", "rejects", "unacceptable", "bad", "harmful"},
       {"no opinion", "don't know", "do not know", "not sure", "hard to say", "it depends", "undecided",
        "no idea", "neutral"},
       {"not", "no", "never", "don't", "doesn't", "didn't", "isn't", "shouldn't", "won't", "cannot", "can't",
        "nor"},
       {"i", "a", "an", "the", "it", "this", "that", "is", "are", "be", "am", "should", "would", "to", "of",
        "and", "or", "in", "on", "for", "we", "they", "people", "think", "believe", "very", "really", "fully",
        "so", "with", "about", "all", "must", "can", "my", "me"}},
      {"da",
       "Her er svarene fra {n} tilfældigt udvalgte personer:",
       {"Jeg støtter det.", "Jeg er helt enig.", "Det er en god idé, jeg bakker det op.",
        "Ja, det bakker jeg op om.", "Jeg synes, det er rigtigt."},
       {"Jeg er imod det.", "Jeg er uenig.", "Det er forkert.", "Det burde forbydes.",
        "Jeg er modstander af det."},
       {"Det ved jeg ikke.", "Jeg har ingen mening om det.", "Jeg er usikker.", "Det kommer an på situationen."},
       {"støtter", "støtte", "enig", "god", "godt", "bakker", "rigtigt", "rigtig", "tilhænger", "ja"},
       {"imod", "uenig", "forkert", "forbydes", "forbyde", "forbudt", "modstander", "dårligt", "dårlig"},
       {"ved ikke", "ved jeg ikke", "ingen mening", "usikker", "kommer an på"},
       {"ikke", "aldrig", "ingen", "intet"},
       {"jeg", "det", "er", "en", "et", "at", "og", "i", "på", "for", "af", "om", "synes", "mener", "helt",
        "burde", "skal", "vi", "de", "den", "med", "til", "op"}},
      {"nl",
       "Hier zijn de antwoorden van {n} willekeurig gekozen mensen:",
       {"Ik steun het.", "Ik ben het er helemaal mee eens.", "Ik ben er voor, dat is goed.",
        "Ja, ik sta erachter.", "Ik ben voorstander."},
       {"Ik ben ertegen.", "Ik ben het oneens.", "Dat is verkeerd.", "Het zou verboden moeten worden.",
        "Ik ben tegenstander."},
       {"Ik weet het niet.", "Ik heb geen mening.", "Ik twijfel.", "Dat hangt ervan af."},
       {"steun", "steunen", "eens", "goed", "voorstander", "erachter", "voor", "ja"},
       {"ertegen", "tegen", "oneens", "verkeerd", "verboden", "verbieden", "tegenstander", "slecht"},
       {"weet het niet", "weet niet", "geen mening", "twijfel", "hangt ervan af"},
       {"niet", "geen", "nooit", "nee"},
       {"ik", "het", "is", "een", "de", "dat", "dit", "ben", "er", "en", "van", "in", "op", "mee", "helemaal",
        "zou", "moeten", "worden", "wij", "zij", "vind", "denk", "sta", "heb"}},
      {"pt",
       "Aqui estão as respostas de {n} pessoas escolhidas aleatoriamente:",
       {"Eu apoio isso.", "Concordo totalmente.", "Sou a favor, é uma coisa boa.", "Sim, eu aprovo.",
        "Acho que é certo."},
       {"Sou contra.", "Discordo.", "Isso é errado.", "Deveria ser proibido.", "Eu me oponho a isso."},
       {"Não sei.", "Não tenho opinião.", "Tenho dúvidas.", "Depende da situação."},
       {"apoio", "apoiar", "apoia", "concordo", "favor", "boa", "bom", "aprovo", "aprovar", "certo", "sim"},
       {"contra", "discordo", "errado", "errada", "proibido", "proibir", "oponho", "ruim"},
       {"não sei", "nao sei", "não tenho opinião", "sem opinião", "tenho dúvidas", "depende"},
       {"não", "nao", "nunca", "nem"},
       {"eu", "é", "e", "a", "o", "os", "as", "um", "uma", "que", "de", "da", "do", "isso", "isto", "sou", "acho",
        "totalmente", "me", "deveria", "ser", "coisa", "nós", "eles"}},
  };
  return lexicons;
}

const LanguageLexicon* find_lexicon(std::string_view language) {
  const auto primary = primary_language(language);
  for (const auto& lex : all_lexicons()) {
    if (lex.language == primary) return &lex;
  }
  return nullptr;
}

}  // namespace valign
