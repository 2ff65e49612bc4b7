"""British to American spelling table (American is canonical).

Entries are expanded from stems so that common inflections are covered; the
resulting mapping is fixed at import time and never maps onto one of its own
keys.
"""

from __future__ import annotations

# -our -> -or
_OUR = (
    "arbour ardour armour behaviour candour clamour colour demeanour endeavour favour "
    "fervour flavour harbour honour humour labour neighbour odour parlour rancour rigour "
    "rumour saviour savour splendour tumour valour vapour vigour"
).split()
_OUR_EXTRA = {
    "behaviours": "behaviors", "behavioural": "behavioral", "colourful": "colorful",
    "colourless": "colorless", "favourite": "favorite", "favourites": "favorites",
    "favourable": "favorable", "favourably": "favorably", "unfavourable": "unfavorable",
    "flavourful": "flavorful", "honourable": "honorable", "humourous": "humorous",
    "labourer": "laborer", "labourers": "laborers", "neighbourhood": "neighborhood",
    "neighbourhoods": "neighborhoods", "neighbouring": "neighboring", "odourless": "odorless",
    "savoury": "savory", "armoured": "armored", "discoloured": "discolored",
    "discolouration": "discoloration", "dishonour": "dishonor",
}

# -re -> -er
_RE = (
    "centre fibre litre metre theatre calibre spectre sombre lustre meagre sabre titre "
    "sepulchre goitre mitre ochre reconnoitre"
).split()
_RE_EXTRA = {
    "centimetre": "centimeter", "centimetres": "centimeters", "millimetre": "millimeter",
    "millimetres": "millimeters", "kilometre": "kilometer", "kilometres": "kilometers",
    "micrometre": "micrometer", "micrometres": "micrometers", "millilitre": "milliliter",
    "millilitres": "milliliters", "decilitre": "deciliter", "decilitres": "deciliters",
    "microlitre": "microliter", "microlitres": "microliters", "centred": "centered",
    "centring": "centering", "titres": "titers", "fibres": "fibers", "epicentre": "epicenter",
}

# -ise -> -ize family (stem before the suffix)
_ISE = (
    "apolog author capital catheter categor civil critic crystall desensit emphas "
    "energ epitom equal familiar fertil final harmon hospital hypnot ideal immobil "
    "immun ion legal local magnet maxim memor minim mobil modern neutral normal "
    "optim organ penal personal polar priorit pulver random real recogn revolution "
    "sanit scrutin sensit steril stabil standard summar symbol sympath synchron "
    "systemat util visual vocal"
).split()
_ISE_SUFFIXES = (("ise", "ize"), ("ised", "ized"), ("ises", "izes"), ("ising", "izing"),
                 ("isation", "ization"), ("isations", "izations"))

# -yse -> -yze; "-yses" is left alone because it is also the plural of "-ysis"
_YSE = "anal catal dial electrol hydrol paral".split()
_YSE_SUFFIXES = (("yse", "yze"), ("ysed", "yzed"), ("ysing", "yzing"))

# ae/oe ligature spellings common in clinical text
_MEDICAL = {
    "anaemia": "anemia", "anaemic": "anemic", "anaesthesia": "anesthesia",
    "anaesthetic": "anesthetic", "anaesthetics": "anesthetics", "anaesthetist": "anesthetist",
    "anaesthetise": "anesthetize", "anaesthetised": "anesthetized",
    "haemoglobin": "hemoglobin", "haemorrhage": "hemorrhage", "haemorrhages": "hemorrhages",
    "haemorrhaging": "hemorrhaging", "haemorrhoids": "hemorrhoids", "haematology": "hematology",
    "haematologist": "hematologist", "haematoma": "hematoma", "haematuria": "hematuria",
    "haemophilia": "hemophilia", "haemostasis": "hemostasis", "haemodialysis": "hemodialysis",
    "haemolysis": "hemolysis", "haemoptysis": "hemoptysis", "haematocrit": "hematocrit",
    "leukaemia": "leukemia", "septicaemia": "septicemia", "ischaemia": "ischemia",
    "ischaemic": "ischemic", "hypoglycaemia": "hypoglycemia", "hyperglycaemia": "hyperglycemia",
    "hypoglycaemic": "hypoglycemic", "hyperglycaemic": "hyperglycemic", "glycaemic": "glycemic",
    "hypokalaemia": "hypokalemia", "hyperkalaemia": "hyperkalemia", "hyponatraemia": "hyponatremia",
    "hypernatraemia": "hypernatremia", "hypocalcaemia": "hypocalcemia", "hypercalcaemia": "hypercalcemia",
    "bacteraemia": "bacteremia", "viraemia": "viremia", "toxaemia": "toxemia", "uraemia": "uremia",
    "hyperlipidaemia": "hyperlipidemia", "dyslipidaemia": "dyslipidemia",
    "hypercholesterolaemia": "hypercholesterolemia",
    "paediatric": "pediatric", "paediatrics": "pediatrics", "paediatrician": "pediatrician",
    "orthopaedic": "orthopedic", "orthopaedics": "orthopedics", "gynaecology": "gynecology",
    "gynaecologist": "gynecologist", "gynaecological": "gynecological", "caesarean": "cesarean",
    "aetiology": "etiology", "haem": "heme", "oedema": "edema", "oedematous": "edematous",
    "oesophagus": "esophagus", "oesophageal": "esophageal", "oesophagitis": "esophagitis",
    "oestrogen": "estrogen", "oestrogens": "estrogens", "oestradiol": "estradiol",
    "foetus": "fetus", "foetal": "fetal", "diarrhoea": "diarrhea", "dyspnoea": "dyspnea",
    "apnoea": "apnea", "orthopnoea": "orthopnea", "tachypnoea": "tachypnea",
    "amenorrhoea": "amenorrhea", "gonorrhoea": "gonorrhea", "seborrhoea": "seborrhea",
    "rhinorrhoea": "rhinorrhea", "steatorrhoea": "steatorrhea", "amoeba": "ameba",
    "coeliac": "celiac", "manoeuvre": "maneuver", "manoeuvres": "maneuvers", "manoeuvred": "maneuvered",
    "manoeuvring": "maneuvering", "encyclopaedia": "encyclopedia", "archaeology": "archeology",
    "anaemias": "anemias", "oedemas": "edemas", "foetuses": "fetuses",
}

# doubled consonant before -ed/-ing/-er
_DOUBLED = {
    "travelled": "traveled", "travelling": "traveling", "traveller": "traveler",
    "travellers": "travelers", "cancelled": "canceled", "cancelling": "canceling",
    "labelled": "labeled", "labelling": "labeling", "modelled": "modeled", "modelling": "modeling",
    "signalled": "signaled", "signalling": "signaling", "counselled": "counseled",
    "counselling": "counseling", "counsellor": "counselor", "counsellors": "counselors",
    "fuelled": "fueled", "fuelling": "fueling", "totalled": "totaled", "totalling": "totaling",
    "channelled": "channeled", "channelling": "channeling", "levelled": "leveled",
    "levelling": "leveling", "marvelled": "marveled", "marvellous": "marvelous",
    "quarrelled": "quarreled", "quarrelling": "quarreling", "jewellery": "jewelry",
    "dialled": "dialed", "dialling": "dialing", "equalled": "equaled", "equalling": "equaling",
    "fulfil": "fulfill", "fulfils": "fulfills", "fulfilment": "fulfillment", "enrol": "enroll",
    "enrols": "enrolls", "enrolment": "enrollment", "instil": "instill", "instils": "instills",
    "skilful": "skillful", "skilfully": "skillfully", "wilful": "willful", "distil": "distill",
    "distils": "distills", "tranquilliser": "tranquilizer", "tranquillisers": "tranquilizers",
    "woollen": "woolen", "swivelled": "swiveled", "tunnelled": "tunneled", "tunnelling": "tunneling",
}

_MISC = {
    "analogue": "analog", "analogues": "analogs", "catalogue": "catalog", "catalogues": "catalogs",
    "dialogue": "dialog", "dialogues": "dialogs", "defence": "defense", "defences": "defenses",
    "offence": "offense", "offences": "offenses", "pretence": "pretense", "licence": "license",
    "licences": "licenses", "practise": "practice", "practised": "practiced", "practising": "practicing",
    "programme": "program", "programmes": "programs", "grey": "gray", "greyish": "grayish",
    "tyre": "tire", "tyres": "tires", "aluminium": "aluminum", "sulphur": "sulfur",
    "sulphate": "sulfate", "sulphates": "sulfates", "sulphide": "sulfide", "sulphonamide": "sulfonamide",
    "sulphonylurea": "sulfonylurea", "mould": "mold", "moulds": "molds", "mouldy": "moldy",
    "plough": "plow", "ageing": "aging", "judgement": "judgment", "judgements": "judgments",
    "acknowledgement": "acknowledgment", "sceptic": "skeptic", "sceptical": "skeptical",
    "scepticism": "skepticism", "cheque": "check", "cheques": "checks", "draught": "draft",
    "pyjamas": "pajamas", "kerb": "curb", "gaol": "jail", "storey": "story", "storeys": "stories",
    "moustache": "mustache", "sanatorium": "sanitarium", "axe": "ax", "whisky": "whiskey",
    "cosy": "cozy", "doughnut": "donut", "artefact": "artifact", "artefacts": "artifacts",
    "speciality": "specialty", "specialities": "specialties", "mum": "mom", "aeroplane": "airplane",
    "aerosolised": "aerosolized", "fibreoptic": "fiberoptic", "gramme": "gram", "grammes": "grams",
    "kilogramme": "kilogram", "kilogrammes": "kilograms", "milligramme": "milligram",
    "milligrammes": "milligrams", "cauterise": "cauterize", "cauterised": "cauterized",
    "plasticiser": "plasticizer",
}


def _expand() -> dict[str, str]:
    table: dict[str, str] = {}
    for stem in _OUR:
        us = stem[:-3] + "or"
        for suffix in ("", "s", "ed", "ing"):
            table[stem + suffix] = us + suffix
    table.update(_OUR_EXTRA)
    for word in _RE:
        us = word[:-2] + "er"
        table[word] = us
        table[word + "s"] = us + "s"
    table.update(_RE_EXTRA)
    for stem in _ISE:
        for uk, us in _ISE_SUFFIXES:
            table[stem + uk] = stem + us
    for stem in _YSE:
        for uk, us in _YSE_SUFFIXES:
            table[stem + uk] = stem + us
    table.update(_MEDICAL)
    table.update(_DOUBLED)
    table.update(_MISC)
    # identity pairs carry no information
    return {k: v for k, v in table.items() if k != v}


BRITISH_TO_AMERICAN: dict[str, str] = _expand()


def americanize(token: str) -> str:
    return BRITISH_TO_AMERICAN.get(token, token)
