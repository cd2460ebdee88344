/** Message catalogs. Adding a locale means adding one more record here;
 * lookups fall back to English so partial catalogs stay usable. */

export type Locale = "en" | "nl";

type Catalog = Record<string, string>;

const en: Catalog = {
  "app.title": "Rate the street",
  "app.intro":
    "You will see one street photo at a time. Give your first impression for the question shown above it. There is no right answer.",
  "form.age": "Age (required)",
  "form.gender": "Gender",
  "form.education": "Highest education level",
  "form.education.primary": "Primary",
  "form.education.secondary": "Secondary",
  "form.education.tertiary": "Tertiary",
  "form.education.postgraduate": "Postgraduate",
  "form.income": "Estimated monthly gross income (€)",
  "form.postcode": "Home postal code",
  "form.country": "Country of residence",
  "form.consent": "I consent to the use of my answers for research.",
  "form.submit": "Start rating",
  "form.error.age": "Please enter your age (18 or older) to take part.",
  "form.error.consent": "The survey needs your consent to continue.",
  "score.awful": "awful",
  "score.bad": "bad",
  "score.neutral": "neutral",
  "score.good": "good",
  "score.great": "great",
  "action.skip": "Skip",
  "action.undo": "Undo",
  "action.help": "Help",
  "action.fullscreen": "Full screen",
  "action.report": "Report an issue",
  "action.language": "Nederlands",
  "category.walkability.name": "Walkability",
  "category.walkability.description":
    "How suitable does this place look for getting around on foot, or with a mobility aid such as a wheelchair? Think about sidewalks and crossings, how streets connect, and whether walking here would feel easy and safe.",
  "category.bikeability.name": "Bikeability",
  "category.bikeability.description":
    "How well does this place look suited to everyday cycling, or to a cycling-equivalent aid such as a mobility scooter? Consider cycle lanes and parking, the layout of junctions, and how comfortable riding here would be.",
  "category.pleasantness.name": "Pleasantness",
  "category.pleasantness.description":
    "How enjoyable does this place feel to the senses? Consider its looks, the light and air, the sounds you would expect, and the presence of people or natural elements.",
  "category.greenness.name": "Greenness",
  "category.greenness.description":
    "How much vegetation and greenery can you see? Count trees, shrubs, grass, planted areas and other living green elements.",
  "category.safety.name": "Safety",
  "category.safety.description":
    "How protected from harm or danger would you feel here, at any time of day or night? Lighting, upkeep, and the chance of other people being around all play a part.",
  "progress.total": "Total progress",
  "progress.category.done": "Category complete!",
  "survey.category.first": "New category",
  "survey.complete.title": "All done, thank you!",
  "survey.complete.body": "You rated every category. Your answers help research into how people experience streets.",
  "survey.congrats.category": "Nice, that category is finished!",
  "toast.retry": "That rating did not reach the server. Please try again.",
  "toast.exhausted": "No more images to rate right now.",
};

const nl: Catalog = {
  "app.title": "Beoordeel de straat",
  "app.intro":
    "Je ziet telkens één straatfoto. Geef je eerste indruk voor de vraag erboven. Er is geen goed of fout antwoord.",
  "form.age": "Leeftijd (verplicht)",
  "form.gender": "Gender",
  "form.education": "Hoogst genoten opleiding",
  "form.education.primary": "Basisonderwijs",
  "form.education.secondary": "Middelbaar onderwijs",
  "form.education.tertiary": "Hoger onderwijs",
  "form.education.postgraduate": "Postacademisch",
  "form.income": "Geschat bruto maandinkomen (€)",
  "form.postcode": "Postcode",
  "form.country": "Land van verblijf",
  "form.consent": "Ik geef toestemming om mijn antwoorden voor onderzoek te gebruiken.",
  "form.submit": "Beginnen",
  "form.error.age": "Vul je leeftijd in (18 of ouder) om mee te doen.",
  "form.error.consent": "Zonder toestemming kan de enquête niet verdergaan.",
  "score.awful": "vreselijk",
  "score.bad": "slecht",
  "score.neutral": "neutraal",
  "score.good": "goed",
  "score.great": "geweldig",
  "action.skip": "Overslaan",
  "action.undo": "Ongedaan maken",
  "action.help": "Hulp",
  "action.fullscreen": "Volledig scherm",
  "action.report": "Probleem melden",
  "action.language": "English",
  "category.walkability.name": "Beloopbaarheid",
  "category.walkability.description":
    "Hoe geschikt lijkt deze plek om te voet te gaan, of met een hulpmiddel zoals een rolstoel? Denk aan stoepen en oversteekplaatsen, hoe straten op elkaar aansluiten en of lopen hier prettig en veilig voelt.",
  "category.bikeability.name": "Fietsbaarheid",
  "category.bikeability.description":
    "Hoe geschikt lijkt deze plek voor dagelijks fietsen, of voor bijvoorbeeld een scootmobiel? Let op fietspaden en stallingen, de inrichting van kruispunten en hoe comfortabel je hier zou rijden.",
  "category.pleasantness.name": "Aangenaamheid",
  "category.pleasantness.description":
    "Hoe prettig voelt deze plek voor de zintuigen? Denk aan het uiterlijk, licht en lucht, de geluiden die je verwacht en de aanwezigheid van mensen of natuur.",
  "category.greenness.name": "Groenheid",
  "category.greenness.description":
    "Hoeveel begroeiing en groen zie je? Tel bomen, struiken, gras, plantvakken en ander levend groen mee.",
  "category.safety.name": "Veiligheid",
  "category.safety.description":
    "Hoe beschermd tegen gevaar zou jij je hier voelen, op elk moment van de dag of nacht? Verlichting, onderhoud en de kans dat er andere mensen zijn spelen allemaal mee.",
  "progress.total": "Totale voortgang",
  "progress.category.done": "Categorie afgerond!",
  "survey.category.first": "Nieuwe categorie",
  "survey.complete.title": "Helemaal klaar, bedankt!",
  "survey.complete.body": "Je hebt elke categorie beoordeeld. Je antwoorden helpen onderzoek naar hoe mensen straten ervaren.",
  "survey.congrats.category": "Mooi, die categorie is klaar!",
  "toast.retry": "De beoordeling heeft de server niet bereikt. Probeer het opnieuw.",
  "toast.exhausted": "Er zijn nu geen foto's meer om te beoordelen.",
};

const CATALOGS: Record<Locale, Catalog> = { en, nl };

export const LOCALES: Locale[] = ["en", "nl"];

export function translate(locale: Locale, key: string): string {
  return CATALOGS[locale][key] ?? CATALOGS.en[key] ?? key;
}

export function makeTranslator(locale: Locale): (key: string) => string {
  return (key) => translate(locale, key);
}
