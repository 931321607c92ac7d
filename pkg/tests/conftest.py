import random

import pytest

import factweave as fw

# keep hypothesis-driven suites quick by default; CI can switch profiles
import hypothesis

hypothesis.settings.register_profile("fast", max_examples=40)
hypothesis.settings.load_profile("fast")


TOY_CSV = """Country,Sport,Sex,Gold
Norway,Biathlon,Female,5
Norway,Biathlon,Male,4
Norway,Skiing,Female,7
Germany,Biathlon,Female,3
Germany,Skiing,Male,2
China,Skiing,Female,1
China,Biathlon,Male,2
USA,Skiing,Female,4
USA,Biathlon,Male,3
France,Skiing,Male,1
"""


def olympics_csv_text() -> str:
    """Deterministic 118-row, 6-column medal table (country x sport grid)."""
    countries = [
        "Norway", "Germany", "China", "USA", "Sweden", "Netherlands", "Austria",
        "Switzerland", "Russia", "France", "Canada", "Japan", "Italy",
        "South Korea", "Finland",
    ]
    sports = ["Biathlon", "Skiing", "Skating", "Curling", "Hockey", "Luge",
              "Bobsled", "Snowboard"]
    rng = random.Random(20220204)
    lines = ["Country,Sport,Sex,Gold Medal,Silver Medal,Bronze Medal"]
    count = 0
    for country in countries:
        for i, sport in enumerate(sports):
            if count >= 118:
                break
            sex = "Female" if (i + countries.index(country)) % 2 == 0 else "Male"
            gold = rng.randint(0, 9)
            silver = rng.randint(0, 9)
            bronze = rng.randint(0, 9)
            lines.append(f"{country},{sport},{sex},{gold},{silver},{bronze}")
            count += 1
    return "\n".join(lines) + "\n"


def olympics_fact() -> fw.DataFact:
    """The flagship example: distribution of female gold medals by country,
    highlighting China."""
    return fw.DataFact(
        type=fw.FactType.DISTRIBUTION,
        subspace=fw.Subspace((fw.Filter("Sex", "Female"),)),
        breakdown="Country",
        measure=fw.Measure("Gold Medal", fw.Aggregation.SUM),
        focus=("China",),
    )


def make_random_csv(rng: random.Random, max_rows: int = 200) -> str:
    """Random small table for oracle suites: categorical + temporal + numeric
    columns with occasional missing cells."""
    n_rows = rng.randint(2, max_rows)
    n_cat = rng.randint(1, 2)
    n_num = rng.randint(1, 3)
    with_year = rng.random() < 0.5
    header = [f"cat{i}" for i in range(n_cat)]
    if with_year:
        header.append("year")
    header += [f"num{i}" for i in range(n_num)]
    lines = [",".join(header)]
    cat_pools = [
        [f"c{i}_{j}" for j in range(rng.randint(2, 6))] for i in range(n_cat)
    ]
    years = [str(y) for y in range(2015, 2015 + rng.randint(3, 6))]
    for _ in range(n_rows):
        cells = [rng.choice(pool) for pool in cat_pools]
        if with_year:
            cells.append(rng.choice(years))
        for _ in range(n_num):
            if rng.random() < 0.08:
                cells.append("")
            else:
                cells.append(str(round(rng.uniform(-50, 50), 3)))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


@pytest.fixture(scope="session")
def toy_dataset() -> fw.Dataset:
    return fw.load_dataset(TOY_CSV)


@pytest.fixture(scope="session")
def olympics_dataset() -> fw.Dataset:
    return fw.load_dataset(olympics_csv_text())
