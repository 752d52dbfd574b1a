#!/usr/bin/env python3
"""Regenerates the synthetic fixtures in this directory (deterministic)."""
import csv
import random
from pathlib import Path

HERE = Path(__file__).resolve().parent
CLASSES = "ABCDEFG"


def retrofit(rng, n=200):
    rows = []
    while len(rows) < n:
        area = round(rng.uniform(50, 5000), 1)
        floors = rng.randint(1, 12)
        consumption = round(rng.uniform(20, 400), 1)
        before = rng.randint(3, 7)
        after = rng.randint(1, before)
        u_area, u_floors, u_cons = (area - 50) / 4950, (floors - 1) / 11, (consumption - 20) / 380
        c0, c1 = before / 7, after / 7
        scores = [u_cons + c0 - 1.15, u_area + u_floors - 0.9, c0 - c1 - 0.3, u_cons - u_floors + 0.05]
        if any(abs(s) < 0.08 for s in scores):
            continue  # keep a margin around every decision boundary
        rows.append([area, floors, consumption, CLASSES[before - 1], CLASSES[after - 1]]
                    + [int(s > 0) for s in scores])
    for k, i in enumerate(sorted(rng.sample(range(n), 3))):
        rows[i][5 + k] = ""  # a few unlabelled rows for the cleaner to drop
    header = ["building_total_area", "above_ground_floors", "energy_consumption_before",
              "initial_energy_class", "energy_class_after", "carrying_out_construction_works",
              "reconstruction_of_engineering_systems", "heat_installation", "water_heating_system"]
    return header, rows


def pv(rng, n=200):
    regions = {"Riga": 1.0, "Daugavpils": 1.04, "Liepaja": 1.08, "Jelgava": 1.02, "Valmiera": 0.97}
    rows = []
    for _ in range(n):
        price = round(rng.uniform(0.12, 0.4), 3)
        consumption = round(rng.uniform(200, 3000), 1)
        current = rng.choice([0, 0, 0, 1, 2, 3, 5])
        planned = rng.choice([2, 3, 4, 5, 6, 8, 10, 12, 15])
        cost = round(planned * rng.uniform(900, 1300), 0)
        region = rng.choice(sorted(regions))
        produced = round((planned - 0.5 * current) * 1000 * regions[region] * rng.uniform(0.95, 1.05), 1)
        generated = round(produced / 12, 1) if rng.random() > 0.1 else ""
        annual = consumption * 12
        self_cons = round(min(produced, annual) * 0.7, 1)
        after = round(annual - self_cons, 1)
        reduction = round(annual - after, 1)
        co2 = round(self_cons * 0.109, 2)
        savings = round(self_cons * price, 2)
        payback = round(cost / savings, 2) if savings > 0 else 99.0
        rows.append([price, consumption, cost, current, planned, generated, region,
                     produced, after, reduction, co2, self_cons, savings, payback])
    header = ["average_electricity_price", "average_monthly_consumption_before", "installation_cost",
              "current_inverter_set_power", "planned_inverter_set_power", "average_energy_generated",
              "region", "electricity_produced", "primary_energy_consumption_after",
              "reduction_of_primary_energy", "co2_emissions_reduction", "expected_annual_self_consumption",
              "annual_financial_savings", "payback_period"]
    return header, rows


def write(name, header, rows):
    with open(HERE / name, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


if __name__ == "__main__":
    write("retrofit_fixture.csv", *retrofit(random.Random(42)))
    write("pv_fixture.csv", *pv(random.Random(43)))
