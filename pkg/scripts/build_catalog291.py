"""Generate fixtures/catalog291: a 42-class ontology, a 291-product corpus and scripted answers.

The ontology has 20 datatype and 49 object properties. Each product answer holds 26 or 27
triples about per-product subjects; nine answers are malformed Turtle. Across the 282 usable
answers every property except ``gtin`` and ``replacementPartFor`` is used at least once.

    python3 scripts/build_catalog291.py
"""

from __future__ import annotations

import json
import random
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
OUT = ROOT / "fixtures" / "catalog291"
NS = "http://example.org/catalog#"
INSTANCE_BASE = "http://example.org/catalog/product/"
SEED = 20240601
N_PRODUCTS = 291
MALFORMED = 9
LONG_ANSWERS = 127  # products with 27 triples; the rest have 26

# name: parent
CLASSES = {
    "Product": None,
    "HomeAppliance": "Product",
    "AirConditioner": "HomeAppliance",
    "SplitAirConditioner": "AirConditioner",
    "PortableAirConditioner": "AirConditioner",
    "Refrigerator": "HomeAppliance",
    "WashingMachine": "HomeAppliance",
    "Dishwasher": "HomeAppliance",
    "VacuumCleaner": "HomeAppliance",
    "ConsumerElectronics": "Product",
    "Television": "ConsumerElectronics",
    "Laptop": "ConsumerElectronics",
    "Smartphone": "ConsumerElectronics",
    "Headphones": "ConsumerElectronics",
    "Monitor": "ConsumerElectronics",
    "Brand": None,
    "Manufacturer": None,
    "Material": None,
    "Color": None,
    "EnergyEfficiencyClass": None,
    "Certification": None,
    "Warranty": None,
    "Compressor": None,
    "Refrigerant": None,
    "Display": None,
    "DisplayTechnology": None,
    "Processor": None,
    "MemoryModule": None,
    "StorageDevice": None,
    "Battery": None,
    "OperatingSystem": None,
    "ConnectivityFeature": None,
    "Port": None,
    "PowerSupply": None,
    "Accessory": None,
    "RemoteControl": None,
    "Filter": None,
    "OperatingMode": None,
    "SafetyFeature": None,
    "CountryOfOrigin": None,
    "Retailer": None,
    "ProductLine": None,
}

# name: (xsd type, comment)
DATATYPE_PROPERTIES = {
    "modelNumber": ("string", "Manufacturer model number as printed."),
    "gtin": ("string", "Global trade item number, digits only."),
    "priceEur": ("decimal", "Retail price in euros."),
    "weightKg": ("decimal", "Net weight in kilograms."),
    "widthCm": ("decimal", "Width in centimetres."),
    "heightCm": ("decimal", "Height in centimetres."),
    "depthCm": ("decimal", "Depth in centimetres."),
    "powerConsumptionW": ("integer", "Rated power consumption in watts."),
    "noiseLevelDb": ("integer", "Sound pressure level in dB(A)."),
    "capacityLitres": ("decimal", "Usable volume in litres."),
    "coolingCapacityBtu": ("integer", "Cooling capacity in BTU/h."),
    "screenSizeInch": ("decimal", "Screen diagonal in inches."),
    "resolution": ("string", "Native resolution as width x height in pixels."),
    "storageCapacityGb": ("integer", "Storage capacity in gigabytes."),
    "memoryGb": ("integer", "Working memory in gigabytes."),
    "batteryCapacityMah": ("integer", "Battery capacity in mAh."),
    "releaseYear": ("integer", "Year of market introduction."),
    "energyConsumptionKwhPerYear": ("decimal", "Annual energy consumption in kWh."),
    "voltageV": ("integer", "Nominal supply voltage in volts."),
    "warrantyYears": ("integer", "Manufacturer warranty in years."),
}

# name: range class
OBJECT_PROPERTIES = {
    "hasBrand": "Brand",
    "manufacturedBy": "Manufacturer",
    "hasMaterial": "Material",
    "hasFrameMaterial": "Material",
    "hasCasingMaterial": "Material",
    "hasColor": "Color",
    "hasSecondaryColor": "Color",
    "hasEnergyClass": "EnergyEfficiencyClass",
    "hasHeatingEnergyClass": "EnergyEfficiencyClass",
    "hasCertification": "Certification",
    "hasNoiseCertification": "Certification",
    "hasWarranty": "Warranty",
    "hasExtendedWarranty": "Warranty",
    "hasCompressor": "Compressor",
    "usesRefrigerant": "Refrigerant",
    "hasDisplay": "Display",
    "hasFrontPanelDisplay": "Display",
    "usesDisplayTechnology": "DisplayTechnology",
    "hasProcessor": "Processor",
    "hasGraphicsProcessor": "Processor",
    "hasMemory": "MemoryModule",
    "hasExpansionMemory": "MemoryModule",
    "hasStorage": "StorageDevice",
    "hasSecondaryStorage": "StorageDevice",
    "hasBattery": "Battery",
    "hasBackupBattery": "Battery",
    "runsOperatingSystem": "OperatingSystem",
    "hasConnectivity": "ConnectivityFeature",
    "supportsWirelessStandard": "ConnectivityFeature",
    "hasPort": "Port",
    "hasChargingPort": "Port",
    "hasAudioPort": "Port",
    "hasPowerSupply": "PowerSupply",
    "hasExternalPowerAdapter": "PowerSupply",
    "includesAccessory": "Accessory",
    "includesMountingKit": "Accessory",
    "hasRemoteControl": "RemoteControl",
    "hasFilter": "Filter",
    "hasPreFilter": "Filter",
    "supportsMode": "OperatingMode",
    "hasDefaultMode": "OperatingMode",
    "hasSafetyFeature": "SafetyFeature",
    "hasChildLock": "SafetyFeature",
    "madeIn": "CountryOfOrigin",
    "soldBy": "Retailer",
    "belongsToProductLine": "ProductLine",
    "compatibleWith": "Product",
    "bundledWith": "Product",
    "replacementPartFor": "Product",
}

UNUSED = ("gtin", "replacementPartFor")
PRODUCT_CLASSES = [
    ("SplitAirConditioner", "air conditioner"),
    ("PortableAirConditioner", "air conditioner"),
    ("Refrigerator", "refrigerator"),
    ("WashingMachine", "washing machine"),
    ("Dishwasher", "dishwasher"),
    ("VacuumCleaner", "vacuum cleaner"),
    ("Television", "television"),
    ("Laptop", "laptop"),
    ("Smartphone", "smartphone"),
    ("Headphones", "headphones"),
    ("Monitor", "monitor"),
]
BRANDS = ["Acme", "Borealis", "Corvid", "Dunmore", "Elstree", "Fenwick", "Galloway", "Harrow"]


def _label(name: str) -> str:
    out = "".join(" " + c.lower() if c.isupper() else c for c in name).strip()
    return out


def ontology_turtle() -> str:
    lines = [
        f"@prefix cat: <{NS}> .",
        "@prefix owl: <http://www.w3.org/2002/07/owl#> .",
        "@prefix rdfs: <http://www.w3.org/2000/01/rdf-schema#> .",
        "@prefix xsd: <http://www.w3.org/2001/XMLSchema#> .",
        "",
        f"<{NS}> a owl:Ontology .",
        "",
    ]
    for name, parent in CLASSES.items():
        parts = [f"cat:{name} a owl:Class"]
        if parent:
            parts.append(f"rdfs:subClassOf cat:{parent}")
        parts.append(f'rdfs:label "{_label(name)}"')
        parts.append(f'rdfs:comment "A {_label(name)}."')
        lines.append(" ;\n    ".join(parts) + " .\n")
    for name, (xsd, comment) in DATATYPE_PROPERTIES.items():
        lines.append(
            f"cat:{name} a owl:DatatypeProperty ;\n    rdfs:domain cat:Product ;\n"
            f'    rdfs:range xsd:{xsd} ;\n    rdfs:comment "{comment}" .\n'
        )
    for name, rng in OBJECT_PROPERTIES.items():
        lines.append(
            f"cat:{name} a owl:ObjectProperty ;\n    rdfs:domain cat:Product ;\n"
            f'    rdfs:range cat:{rng} ;\n    rdfs:comment "Links a product to its {_label(rng)}." .\n'
        )
    return "\n".join(lines)


def _value(rng: random.Random, name: str, xsd: str):
    if xsd == "integer":
        return rng.randint(1, 9000)
    if xsd == "decimal":
        return f"{rng.randint(1, 999)}.{rng.randint(0, 9)}"
    return f"{name[:3].upper()}-{rng.randint(1000, 9999)}"


def build(rng: random.Random) -> tuple[list[dict], dict[str, str]]:
    dt_names = [n for n in DATATYPE_PROPERTIES if n not in UNUSED]
    obj_names = [n for n in OBJECT_PROPERTIES if n not in UNUSED]
    malformed = set(rng.sample(range(N_PRODUCTS), MALFORMED))
    usable = [i for i in range(N_PRODUCTS) if i not in malformed]
    long_answers = set(usable[:LONG_ANSWERS])

    records, answers = [], {}
    dt_cursor = obj_cursor = 0
    for i in range(N_PRODUCTS):
        pid = f"P-{i + 1:03d}"
        cls, category = PRODUCT_CLASSES[i % len(PRODUCT_CLASSES)]
        brand = rng.choice(BRANDS)
        n_dt = 10 if i in long_answers else 9
        # rotate through the properties so all 67 get used across the corpus
        dts = [dt_names[(dt_cursor + k) % len(dt_names)] for k in range(n_dt)]
        objs = [obj_names[(obj_cursor + k) % len(obj_names)] for k in range(8)]
        dt_cursor += n_dt
        obj_cursor += 8
        values = {n: _value(rng, n, DATATYPE_PROPERTIES[n][0]) for n in dts}
        facts = "; ".join(f"{_label(n)}: {v}" for n, v in values.items())
        features = ", ".join(_label(OBJECT_PROPERTIES[n]) for n in objs)
        records.append(
            {
                "id": pid,
                "category": category,
                "description": f"{brand} {_label(cls)}. {facts}. Featuring: {features}.",
                "source": "synthetic catalog fixture",
            }
        )
        subject = f"<{INSTANCE_BASE}{pid.lower()}>"
        body = [f"{subject} a cat:{cls} ."]
        for n, v in values.items():
            lit = f'"{v}"' if DATATYPE_PROPERTIES[n][0] == "string" else str(v)
            body.append(f"{subject} cat:{n} {lit} .")
        for n in objs:
            entity = f"<{INSTANCE_BASE}{pid.lower()}/{n.lower()}>"
            body.append(f"{subject} cat:{n} {entity} .")
            body.append(f"{entity} a cat:{OBJECT_PROPERTIES[n]} .")
        turtle = f"@prefix cat: <{NS}> .\n\n" + "\n".join(body) + "\n"
        if i in malformed:
            turtle = turtle.replace(" .\n", " \n", 3)  # statements run together
        answers[pid] = "```turtle\n" + turtle + "```\n"
    return records, answers


def main() -> int:
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "ontology.ttl").write_text(ontology_turtle(), encoding="utf-8")
    records, answers = build(random.Random(SEED))
    with open(OUT / "corpus.jsonl", "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r, ensure_ascii=False) + "\n")
    with open(OUT / "answers.jsonl", "w", encoding="utf-8") as fh:
        for pid, text in answers.items():
            fh.write(json.dumps({"product_id": pid, "text": text}) + "\n")
    print(f"wrote {len(records)} products and {len(answers)} answers to {OUT}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
