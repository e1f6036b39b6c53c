"""Writes data/fixtures/owid_synthetic.csv: a made-up OWID-schema file.

Every country gets logistic-style cumulative cases and deaths with a weekly
reporting pattern, a stringency index, a reproduction rate and a constant
population. The numbers are synthetic and only exercise the harness; they
say nothing about real epidemics.
"""

import csv
import datetime as dt
import math
import pathlib
import random

COUNTRIES = [
    "Angola", "Botswana", "Comoros", "Democratic Republic of Congo", "Eswatini", "Lesotho",
    "Madagascar", "Malawi", "Mauritius", "Mozambique", "Namibia", "Seychelles", "South Africa",
    "Tanzania", "Zambia", "Zimbabwe",
]
WEEK = [1.15, 1.05, 1.0, 0.95, 1.1, 0.8, 0.95]
DAYS = 240
START = dt.date(2020, 4, 1)
HEADER = [
    "iso_code", "continent", "location", "date", "total_cases", "new_cases", "new_cases_smoothed",
    "total_deaths", "new_deaths", "total_cases_per_million", "stringency_index", "reproduction_rate",
    "population",
]


def country_rows(index, name, rng):
    pop = 1e6 * (1 + index)
    peak = 2000.0 * (1 + index % 5)
    mid = 120 + 10 * (index % 4)
    cases = 0.0
    deaths = 0.0
    for t in range(DAYS):
        base = peak / (1 + math.exp(-(t - mid) / 18.0)) * (1.0 / 18.0) * 4
        new_cases = max(0.0, round(base * WEEK[t % 7] * (1 + 0.05 * rng.gauss(0, 1))))
        new_deaths = max(0.0, round(0.02 * new_cases * (1 + 0.1 * rng.gauss(0, 1))))
        cases += new_cases
        deaths += new_deaths
        stringency = 40 + 30 * math.sin(t / 40.0) + (index % 3)
        rate = 1.0 + 0.3 * math.cos(t / 25.0)
        # A few gaps so the fill policy is exercised.
        missing = (t * 7 + index) % 53 == 0 and t > 0
        yield [
            "X%02d" % index, "Africa", name, (START + dt.timedelta(days=t)).isoformat(),
            "" if missing else "%g" % cases, "" if missing else "%g" % new_cases, "%.3f" % new_cases,
            "" if missing else "%g" % deaths, "" if missing else "%g" % new_deaths,
            "%.3f" % (cases / pop * 1e6), "%.2f" % stringency, "%.2f" % rate, "%g" % pop,
        ]


def main():
    out = pathlib.Path(__file__).resolve().parent.parent / "data" / "fixtures" / "owid_synthetic.csv"
    rng = random.Random(20200401)
    with out.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        for i, name in enumerate(COUNTRIES):
            for row in country_rows(i, name, rng):
                w.writerow(row)
    print(out)


if __name__ == "__main__":
    main()
