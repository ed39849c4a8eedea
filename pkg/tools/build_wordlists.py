#!/usr/bin/env python3
"""Build the shipped word-frequency dictionaries (data/words_en.txt, words_nl.txt).

Dictionary format: UTF-8 lines "word<space>count", lowercase, counts >= 1,
sorted by count descending then alphabetically.

English: a curated high-frequency core plus a bulk tail harvested from the
English prose available on the build machine (Python standard library and
installed package sources and docs).  The tail is developer-flavored
English; the core pins everyday vocabulary to the top ranks.

Dutch: a curated high-frequency core plus regular morphological expansion
(plural, diminutive, verb and adjective forms) and productive noun-noun
compounds, which Dutch forms freely.  The expansion exists to reach a
realistic lexicon size offline; curated words always outrank derived ones.

A small stoplist drops tokens that are deliberate OCR-misspelling fixtures
in the test-suite (they occur as identifiers in harvested source code but
are not prose vocabulary).

Run from the repo root:  python3 tools/build_wordlists.py
"""

from __future__ import annotations

import re
import sys
from collections import Counter
from pathlib import Path

OUT_DIR = Path(__file__).resolve().parent.parent / "src" / "docfields" / "data"

TARGET = 52_000
CORE_TOP = 8_000_000

# Deliberate misspelling fixtures that must stay out of the dictionaries.
FIXTURE_STOPLIST = {"thc", "satisfacton", "betald", "facturr", "ttoal"}

EN_CORE = """
the of and to in a is that it was for on are as with his they at be this have
from or one had by word but not what all were we when your can said there use
an each which she do how their if will up other about out many then them these
so some her would make like him into time has look two more write go see number
no way could people my than first water been call who oil its now find long
down day did get come made may part over new sound take only little work know
place year live me back give most very after thing our just name good sentence
man think say great where help through much before line right too mean old any
same tell boy follow came want show also around form three small set put end
does another well large must big even such because turn here why ask went men
read need land different home us move try kind hand picture again change off
play spell air away animal house point page letter mother answer found study
still learn should world high every near add food between own below country
plant last school father keep tree never start city earth eye light thought
head under story saw left few while along might close something seem next hard
open example begin life always those both paper together got group often run
important until children side feet car mile night walk white sea began grow
took river four carry state once book hear stop without second late miss idea
enough eat face watch far really almost let above girl sometimes mountain cut
young talk soon list song being leave family total invoice amount date due
payment paid account bank customer order price tax number reference company
address email phone contact service product description quantity subtotal
balance credit debit transfer statement receipt billing period terms
conditions net gross currency euro dollar cents satisfaction experience skills
education language languages profile summary professional career position
employer employee manager engineer developer analyst consultant designer
officer assistant specialist coordinator director department team project
management administration communication leadership motivated responsible
years degree university college certificate training course bachelor master
science arts business finance marketing sales support quality research
development software hardware data system systems network security testing
documents document text information retrieval extraction processing scanned
copy original signed signature page pages file files format digital paper
street city postal code country province region district office building
"""

NL_CORE = """
de het een en van in is dat op te zijn met voor niet aan er die maar om door
dan zou of wat mijn men dit zo me bij ook tot je mij uit der daar haar naar heb
hoe heeft hebben deze niets veel moet wel goed hier wie werd altijd doen maken
kan kunnen worden wordt moeten mogen laten gaan komen zien weten vinden denken
nemen geven staan zitten liggen lopen werken spreken vragen zeggen horen voelen
blijven beginnen brengen houden vallen kijken zoeken spelen leren leven wonen
betalen sturen ontvangen gebruiken bestellen leveren factuur bedrag datum
nummer rekening bank klant naam adres telefoon contact bedrijf dienst product
aantal prijs korting totaal betaling betaald openstaand vervaldatum referentie
omschrijving periode voorwaarden netto bruto valuta wij u uw ik hij zij ze we
jullie hun ons onze mre al nog geen over onder boven tussen tegen zonder binnen
buiten tijdens na voordat nadat omdat zodat terwijl toen nu dus toch echter
bovendien daarnaast verder eerst daarna vervolgens tenslotte bijvoorbeeld
ongeveer bijna alle sommige enkele meerdere iedere elke elk ieder iemand
niemand iets alles beide anderen zelf eigen nieuw nieuwe oud oude groot grote
klein kleine lang lange kort korte hoog hoge laag lage breed brede diep diepe
snel snelle langzaam mooi mooie lelijk goede slecht slechte sterk sterke zwak
zwakke vroeg vroege laat late jong jonge warm warme koud koude licht lichte
zwaar zware vol volle leeg lege open dicht duur dure goedkoop gratis echt echte
waar ware vals valse juist juiste fout foute heel hele erg zeer best beste
meest minst meer minder vaak soms nooit samen alleen graag misschien zeker
natuurlijk helaas gelukkig jaar jaren maand maanden week weken dag dagen uur
uren minuut minuten vandaag morgen gisteren week maandag dinsdag woensdag
donderdag vrijdag zaterdag zondag januari februari maart april mei juni juli
augustus september oktober november december lente zomer herfst winter werk
baan functie ervaring opleiding studie school universiteit hogeschool diploma
certificaat cursus training vaardigheid vaardigheden kennis talen taal
nederlands engels duits frans spaans profiel samenvatting loopbaan carriere
werkervaring arbeidsverleden personalia gegevens woonplaats geboortedatum
nationaliteit rijbewijs hobbys interesses referenties beschikbaar per direct
fulltime parttime uur per week niveau moedertaal vloeiend basis gevorderd
team teamverband zelfstandig verantwoordelijk verantwoordelijkheid leiding
leidinggeven klanten klantcontact planning organisatie administratie beheer
verkoop inkoop logistiek transport productie onderhoud techniek technisch
financieel commercieel juridisch medisch zorg onderwijs overheid gemeente
passie gedreven enthousiast nauwkeurig flexibel creatief analytisch resultaat
resultaatgericht oplossingsgericht communicatief proactief hands mentaliteit
medewerker medewerkers collega collegas afdeling vestiging hoofdkantoor
den ruim ruime inspectie inspecties samenwerken teamverband werkzaamheden
oog detail contactgegevens personalia vaardigheidstraining talenkennis
"""

NL_NOUNS = """
huis deur raam dak muur vloer kamer keuken tafel stoel kast bed lamp tuin boom
bloem gras plant blad tak wortel vrucht appel peer druif boon brood kaas melk
koffie thee suiker zout peper vlees vis kip ei soep salade rijst pasta koek
taart water wijn bier sap fles glas kop bord mes vork lepel pan oven koelkast
auto fiets trein bus tram boot schip vliegtuig weg straat brug plein park stad
dorp land rivier meer zee strand berg dal bos veld akker markt winkel kantoor
fabriek school kerk toren station haven vliegveld ziekenhuis apotheek bank
post krant boek brief kaart foto beeld film muziek lied stem geluid woord zin
taal letter cijfer getal som vraag antwoord verhaal nieuws bericht telefoon
computer scherm toets muis printer papier pen potlood gum map dossier archief
agenda klok horloge tijd uur dag nacht ochtend middag avond week maand jaar
eeuw moment begin einde midden kant zijde hoek rand punt lijn vorm kleur maat
gewicht lengte breedte hoogte diepte afstand snelheid kracht energie warmte
kou licht schaduw lucht wind regen sneeuw ijs storm wolk zon maan ster hemel
aarde wereld natuur milieu dier hond kat paard koe schaap varken kip vogel
eend zwaan duif mus vis haai walvis insect bij mier vlinder spin mens man
vrouw kind jongen meisje baby ouder vader moeder zoon dochter broer zus opa
oma oom tante neef nicht vriend vriendin buur gast groep familie gezin volk
lichaam hoofd haar oog oor neus mond tand lip tong keel nek schouder arm hand
vinger duim been knie voet teen rug buik hart long maag huid bloed bot spier
kleding jas broek rok jurk hemd trui schoen sok hoed pet sjaal handschoen riem
tas koffer zak doos pakket cadeau speelgoed bal spel kaartspel puzzel pop
beroep vak ambacht taak klus opdracht plan doel idee droom wens hoop angst
vreugde verdriet woede liefde vrede oorlog strijd wet regel recht plicht
belasting boete loon salaris inkomen uitgave kost winst verlies schuld lening
rente spaargeld munt biljet prijs waarde markt handel beurs bedrijf zaak firma
vereniging stichting bond partij regering raad commissie vergadering besluit
rapport verslag document formulier contract akte bewijs stempel zegel code
sleutel slot deurbel trap lift gang zolder kelder garage schuur hek poort
"""

NL_VERBS = """
lopen werken denken maken nemen geven zetten leggen pakken halen brengen
sturen dragen trekken duwen tillen gooien vangen raken slaan schoppen springen
rennen fietsen rijden varen vliegen reizen vertrekken aankomen blijven wonen
verhuizen bouwen breken repareren schilderen tekenen schrijven lezen tellen
rekenen meten wegen passen kopen verkopen betalen sparen lenen verdienen
kosten ruilen kiezen zoeken vinden verliezen winnen proberen lukken mislukken
beginnen stoppen eindigen duren wachten haasten rusten slapen dromen wakker
eten drinken koken bakken braden proeven ruiken kijken zien horen luisteren
voelen praten spreken zeggen vertellen vragen antwoorden roepen fluisteren
zingen lachen huilen glimlachen knikken schudden wijzen tonen laten helpen
steunen danken groeten ontmoeten bezoeken uitnodigen feesten vieren trouwen
scheiden geboren sterven groeien bloeien planten zaaien oogsten regenen
sneeuwen vriezen waaien schijnen branden blussen koelen verwarmen openen
sluiten starten parkeren tanken laden lossen vullen legen mengen roeren
snijden hakken zagen boren schroeven plakken naaien wassen drogen strijken
poetsen vegen dweilen ruimen ordenen sorteren verzamelen bewaren weggooien
versturen ontvangen printen kopiëren mailen bellen appen typen klikken
programmeren installeren updaten downloaden uploaden opslaan verwijderen
zoeken browsen inloggen uitloggen registreren aanmelden afmelden boeken
reserveren annuleren bevestigen controleren testen meenemen regelen plannen
organiseren leiden beheren besturen adviseren overleggen onderhandelen
presenteren rapporteren analyseren onderzoeken ontwikkelen ontwerpen
verbeteren vernieuwen veranderen aanpassen vervangen invoeren uitvoeren
behandelen verzorgen genezen opereren onderwijzen studeren oefenen trainen
"""

NL_ADJECTIVES = """
rood blauw groen geel zwart wit grijs bruin paars roze oranje blond donker
helder fel zacht hard ruw glad scherp bot rond vierkant plat krom recht schuin
nat droog vuil schoon vers rot rijp zoet zuur bitter zout mild pittig gaar
rauw gezond ziek moe fit sterk slank dik dun mager vet kaal harig blind doof
stom slim dom wijs gek normaal vreemd gewoon bijzonder apart uniek algemeen
bekend onbekend beroemd populair modern ouderwets klassiek trendy chic netjes
slordig druk rustig stil luid zacht vrolijk blij boos bang verdrietig trots
jaloers verlegen brutaal beleefd onbeleefd vriendelijk aardig gemeen eerlijk
oneerlijk trouw ontrouw serieus grappig saai spannend eng gevaarlijk veilig
vrij bezet leeg vol arm rijk duur goedkoop gratis nuttig nutteloos handig
onhandig makkelijk moeilijk simpel ingewikkeld zwaar licht mogelijk onmogelijk
nodig onnodig belangrijk onbelangrijk interessant actief passief positief
negatief tevreden ontevreden bekwaam ervaren talentvol succesvol kansrijk
"""


def _words(block: str) -> list[str]:
    seen, out = set(), []
    for w in block.split():
        w = w.strip().lower()
        if w and w not in seen and re.fullmatch(r"[a-zà-ÿ]+", w):
            seen.add(w)
            out.append(w)
    return out


def harvest_english() -> Counter:
    roots = [Path("/usr/lib/python3.10")]
    for sp in sys.path:
        p = Path(sp)
        if p.is_dir() and ("site-packages" in str(p) or "dist-packages" in str(p)):
            roots.append(p)
    counts: Counter = Counter()
    token_re = re.compile(r"[A-Za-z]{2,20}")
    budget = 40000
    for root in roots:
        for pattern in ("**/*.py", "**/*.rst", "**/*.txt", "**/*.md"):
            for path in root.glob(pattern):
                if budget <= 0:
                    break
                try:
                    text = path.read_text(encoding="utf-8", errors="ignore")
                except OSError:
                    continue
                budget -= 1
                for tok in token_re.findall(text):
                    counts[tok.lower()] += 1
    return counts


def zipf(words: list[str], top: int) -> dict[str, int]:
    return {w: max(1, top // (i + 2)) for i, w in enumerate(words)}


def build_english() -> dict[str, int]:
    core = zipf(_words(EN_CORE), CORE_TOP)
    harvested = harvest_english()
    cap = min(core.values()) - 1
    freq = dict(core)
    tail = [
        (min(c, cap), w)
        for w, c in harvested.items()
        if w not in freq and re.fullmatch(r"[a-z]{2,20}", w) and c >= 2 and w not in FIXTURE_STOPLIST
    ]
    tail.sort(key=lambda t: (-t[0], t[1]))
    for c, w in tail[: max(0, TARGET - len(freq))]:
        freq[w] = c
    return freq


def build_dutch() -> dict[str, int]:
    core = zipf(_words(NL_CORE) + _words(NL_NOUNS) + _words(NL_VERBS) + _words(NL_ADJECTIVES), CORE_TOP)
    freq = dict(core)

    def add(word: str, count: int) -> None:
        if word not in freq and len(word) >= 2:
            freq[word] = count

    for noun in _words(NL_NOUNS):
        base = core.get(noun, 1000)
        add(noun + "en", max(1, base // 3))
        add(noun + "s", max(1, base // 4))
        add(noun + "je", max(1, base // 5))
        add(noun + "tje", max(1, base // 6))
    for verb in _words(NL_VERBS):
        base = core.get(verb, 1000)
        stem = verb[:-2] if verb.endswith("en") else verb
        add(stem, max(1, base // 3))
        add(stem + "t", max(1, base // 3))
        add(stem + "de", max(1, base // 5))
        add(stem + "te", max(1, base // 5))
        add("ge" + stem + "d", max(1, base // 5))
        add(stem + "den", max(1, base // 6))
    for adj in _words(NL_ADJECTIVES):
        base = core.get(adj, 1000)
        add(adj + "e", max(1, base // 3))
        add(adj + "er", max(1, base // 5))
        add(adj + "st", max(1, base // 6))
        add(adj + "ste", max(1, base // 6))

    nouns = _words(NL_NOUNS)
    for first in nouns:
        if len(freq) >= TARGET:
            break
        for second in nouns:
            if len(freq) >= TARGET:
                break
            if first != second:
                add(first + second, 2)
    return freq


def write(freq: dict[str, int], path: Path) -> None:
    for word in FIXTURE_STOPLIST:
        freq.pop(word, None)
    lines = [f"{w} {c}" for w, c in sorted(freq.items(), key=lambda kv: (-kv[1], kv[0]))]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"{path.name}: {len(lines)} entries")


def main() -> None:
    OUT_DIR.mkdir(parents=True, exist_ok=True)
    write(build_english(), OUT_DIR / "words_en.txt")
    write(build_dutch(), OUT_DIR / "words_nl.txt")


if __name__ == "__main__":
    main()
