from __future__ import annotations

import json
import sqlite3
from pathlib import Path

import pytest

from sqlweaver.mining import MiningConfig, mine

DEMO_DDL = """
CREATE TABLE singer ( -- performing artists
    singer_id INTEGER PRIMARY KEY, -- unique singer identifier
    name TEXT NOT NULL, -- stage name
    age INTEGER, -- age in years
    nationality TEXT -- country of origin
);
CREATE TABLE concert ( -- scheduled performances
    concert_id INTEGER PRIMARY KEY, -- unique concert identifier
    singer_id INTEGER REFERENCES singer(singer_id) -- performing singer
);
CREATE TABLE customer ( -- registered buyers
    id INTEGER PRIMARY KEY, -- unique customer identifier
    name TEXT -- customer full name
);
CREATE TABLE orders ( -- ticket purchase orders
    order_id INTEGER PRIMARY KEY, -- unique order identifier
    customer_id INTEGER REFERENCES customer(id), -- purchasing customer
    status INTEGER -- 0: init; 1: paid; 2: cancelled
);
"""

DEMO_ROWS = {
    "singer": [(1, "Ann", 30, "US"), (2, "Bo", 25, "UK"), (3, "Ann", 40, "US")],
    "concert": [(10, 1), (11, 1), (12, 2)],
    "customer": [(1, "Alice"), (2, "Bob")],
    "orders": [(100, 1, 0), (101, 1, 1), (102, 2, 2)],
}

LIBRARY_DDL = """
CREATE TABLE author ( -- book writers
    author_id INTEGER PRIMARY KEY, -- unique author identifier
    author_name TEXT, -- full name
    country TEXT -- home country
);
CREATE TABLE book ( -- catalogued books
    book_id INTEGER PRIMARY KEY, -- unique book identifier
    title TEXT, -- book title
    author_id INTEGER REFERENCES author(author_id), -- writer of the book
    price REAL, -- list price in dollars
    genre TEXT -- fiction or nonfiction
);
"""

LIBRARY_ROWS = {
    "author": [(1, "Carol", "US"), (2, "Dan", "FR"), (3, "Eve", "US"), (4, "Frank", "DE")],
    "book": [
        (1, "Alpha", 1, 10.0, "fiction"),
        (2, "Beta", 1, 12.5, "fiction"),
        (3, "Gamma", 2, 8.0, "nonfiction"),
        (4, "Delta", 3, 15.0, "fiction"),
        (5, "Epsilon", 3, 9.5, "nonfiction"),
        (6, "Zeta", 3, 20.0, "fiction"),
    ],
}


def build_sqlite(path: Path, ddl: str, rows: dict[str, list[tuple]]) -> Path:
    conn = sqlite3.connect(path)
    try:
        conn.executescript(ddl)
        for table, table_rows in rows.items():
            if not table_rows:
                continue
            placeholders = ",".join("?" * len(table_rows[0]))
            conn.executemany(f"INSERT INTO {table} VALUES ({placeholders})", table_rows)
        conn.commit()
    finally:
        conn.close()
    return path


def _strip_clause(ddl: str, pattern: str) -> str:
    import re

    return re.sub(pattern, "", ddl)


@pytest.fixture(scope="session")
def fixture_dir(tmp_path_factory) -> Path:
    return tmp_path_factory.mktemp("dbs")


@pytest.fixture(scope="session")
def demo_db(fixture_dir: Path) -> Path:
    return build_sqlite(fixture_dir / "demo_db.sqlite", DEMO_DDL, DEMO_ROWS)


@pytest.fixture(scope="session")
def library_db(fixture_dir: Path) -> Path:
    return build_sqlite(fixture_dir / "library.sqlite", LIBRARY_DDL, LIBRARY_ROWS)


@pytest.fixture(scope="session")
def demo_db_nofk(fixture_dir: Path) -> Path:
    """Demo schema with every declared foreign key stripped (keys kept)."""
    ddl = _strip_clause(DEMO_DDL, r" REFERENCES \w+\(\w+\)")
    return build_sqlite(fixture_dir / "demo_nofk.sqlite", ddl, DEMO_ROWS)


@pytest.fixture(scope="session")
def library_db_nofk(fixture_dir: Path) -> Path:
    ddl = _strip_clause(LIBRARY_DDL, r" REFERENCES \w+\(\w+\)")
    return build_sqlite(fixture_dir / "library_nofk.sqlite", ddl, LIBRARY_ROWS)


@pytest.fixture(scope="session")
def demo_db_nokeys(fixture_dir: Path) -> Path:
    """Demo schema with no declared keys at all."""
    ddl = _strip_clause(DEMO_DDL, r" PRIMARY KEY| REFERENCES \w+\(\w+\)")
    return build_sqlite(fixture_dir / "demo_nokeys.sqlite", ddl, DEMO_ROWS)


# a permissive config for the tiny fixtures: every table is fully scanned
# and the enum ratio gate is lifted so three-row tables can qualify
ENUM_CFG = MiningConfig(enum_max_ratio=1.0, enum_max_distinct=20)


@pytest.fixture(scope="session")
def demo_card(demo_db: Path):
    return mine(demo_db, ENUM_CFG)


@pytest.fixture(scope="session")
def library_card(library_db: Path):
    return mine(library_db, ENUM_CFG)


# --- synthetic database for constant-repair scenarios -------------------------

SHOP_DDL = """
CREATE TABLE orders ( -- purchase orders
    order_id INTEGER PRIMARY KEY,
    status INTEGER, -- 0: init; 1: paid; 2: cancelled
    priority INTEGER -- 1: low; 2: high
);
CREATE TABLE customers (
    customer_id INTEGER PRIMARY KEY,
    name TEXT,
    city TEXT
);
CREATE TABLE products (
    product_id INTEGER PRIMARY KEY,
    product_name TEXT,
    category TEXT
);
CREATE TABLE people (
    person_id INTEGER PRIMARY KEY,
    first_name TEXT,
    last_name TEXT
);
CREATE TABLE addresses (
    address_id INTEGER PRIMARY KEY,
    street TEXT,
    city TEXT
);
CREATE TABLE items (
    item_id INTEGER PRIMARY KEY,
    code TEXT,
    label TEXT
);
"""

SHOP_ROWS = {
    "orders": [(1, 0, 1), (2, 1, 2), (3, 2, 1), (4, 1, 1)],
    "customers": [(1, "Alice", "New York"), (2, "Bob", "Paris")],
    "products": [(1, "Widget", "tools"), (2, "Gizmo", "toys")],
    "people": [(1, "John", "Smith"), (2, "Mary", "Jones")],
    "addresses": [(1, "5th Avenue", "New York"), (2, "Main Street", "Springfield")],
    "items": [(1, "A1", "Blue Hat"), (2, "B2", "Red Scarf")],
}

# (broken query, expected repaired query), grouped by repair strategy
SHOP_MISMATCHES: list[tuple[str, str]] = [
    # enum labels written where stored codes live
    ("SELECT count(*) FROM orders WHERE status = 'init'", "SELECT count(*) FROM orders WHERE status = 0"),
    ("SELECT count(*) FROM orders WHERE status = 'paid'", "SELECT count(*) FROM orders WHERE status = 1"),
    ("SELECT order_id FROM orders WHERE status = 'cancelled'", "SELECT order_id FROM orders WHERE status = 2"),
    ("SELECT count(*) FROM orders WHERE priority = 'high'", "SELECT count(*) FROM orders WHERE priority = 2"),
    # wrong casing of stored text
    ("SELECT customer_id FROM customers WHERE name = 'alice'", "SELECT customer_id FROM customers WHERE name = 'Alice'"),
    ("SELECT customer_id FROM customers WHERE city = 'new york'", "SELECT customer_id FROM customers WHERE city = 'New York'"),
    ("SELECT product_id FROM products WHERE product_name = 'widget'", "SELECT product_id FROM products WHERE product_name = 'Widget'"),
    # value lives in a sibling column of the same table
    ("SELECT person_id FROM people WHERE first_name = 'Smith'", "SELECT person_id FROM people WHERE last_name = 'Smith'"),
    ("SELECT address_id FROM addresses WHERE city = '5th Avenue'", "SELECT address_id FROM addresses WHERE street = '5th Avenue'"),
    ("SELECT item_id FROM items WHERE code = 'Blue Hat'", "SELECT item_id FROM items WHERE label = 'Blue Hat'"),
]

SHOP_VALID_QUERIES: list[str] = [
    "SELECT count(*) FROM orders WHERE status = 0",
    "SELECT count(*) FROM orders WHERE status = 1",
    "SELECT order_id FROM orders WHERE status = 2",
    "SELECT count(*) FROM orders WHERE priority = 2",
    "SELECT customer_id FROM customers WHERE name = 'Alice'",
    "SELECT customer_id FROM customers WHERE city = 'New York'",
    "SELECT product_id FROM products WHERE product_name = 'Widget'",
    "SELECT person_id FROM people WHERE last_name = 'Smith'",
    "SELECT address_id FROM addresses WHERE street = '5th Avenue'",
    "SELECT item_id FROM items WHERE label = 'Blue Hat'",
]


@pytest.fixture(scope="session")
def shop_db(fixture_dir: Path) -> Path:
    return build_sqlite(fixture_dir / "shop.sqlite", SHOP_DDL, SHOP_ROWS)


@pytest.fixture(scope="session")
def shop_card(shop_db: Path):
    return mine(shop_db, ENUM_CFG)


# --- Spider-format benchmark fixture ----------------------------------------

BENCHMARK_ITEMS: list[tuple[str, str, str]] = [
    # (database_id, question, gold_sql)
    ("demo_db", "How many singers are there?", "SELECT count(*) FROM singer"),
    ("demo_db", "List the names of all singers.", "SELECT name FROM singer"),
    ("demo_db", "What are the distinct nationalities of singers?", "SELECT DISTINCT nationality FROM singer"),
    ("demo_db", "How many concerts are there?", "SELECT count(*) FROM concert"),
    ("demo_db", "Show the names of singers ordered by age descending.", "SELECT name FROM singer ORDER BY age DESC"),
    ("demo_db", "How many concerts has each singer performed, by singer id?", "SELECT singer_id, count(*) FROM concert GROUP BY singer_id"),
    ("demo_db", "What is the average age of singers?", "SELECT avg(age) FROM singer"),
    ("demo_db", "List singer names together with the ids of their concerts.", "SELECT singer.name, concert.concert_id FROM singer JOIN concert ON singer.singer_id = concert.singer_id"),
    ("demo_db", "How many orders are paid?", "SELECT count(*) FROM orders WHERE status = 1"),
    ("demo_db", "Show names of customers who have at least one order.", "SELECT DISTINCT customer.name FROM customer JOIN orders ON customer.id = orders.customer_id"),
    ("demo_db", "What is the name of the oldest singer?", "SELECT name FROM singer ORDER BY age DESC LIMIT 1"),
    ("demo_db", "How many orders does each customer have?", "SELECT customer_id, count(*) FROM orders GROUP BY customer_id"),
    ("library", "How many books are there?", "SELECT count(*) FROM book"),
    ("library", "List all book titles in alphabetical order.", "SELECT title FROM book ORDER BY title"),
    ("library", "What is the average price of books?", "SELECT avg(price) FROM book"),
    ("library", "Show the number of books per author id.", "SELECT author_id, count(*) FROM book GROUP BY author_id"),
    ("library", "Which authors are from US?", "SELECT author_name FROM author WHERE country = 'US'"),
    ("library", "List book titles with their author names.", "SELECT book.title, author.author_name FROM book JOIN author ON book.author_id = author.author_id"),
    ("library", "How many fiction books are there?", "SELECT count(*) FROM book WHERE genre = 'fiction'"),
    ("library", "What is the most expensive book?", "SELECT title FROM book ORDER BY price DESC LIMIT 1"),
]


def build_spider_dir(root: Path) -> Path:
    """Materialize a miniature benchmark directory in the Spider layout."""
    root.mkdir(parents=True, exist_ok=True)
    for db_id, ddl, rows in (
        ("demo_db", DEMO_DDL, DEMO_ROWS),
        ("library", LIBRARY_DDL, LIBRARY_ROWS),
    ):
        db_dir = root / "database" / db_id
        db_dir.mkdir(parents=True, exist_ok=True)
        db_path = db_dir / f"{db_id}.sqlite"
        if not db_path.exists():
            build_sqlite(db_path, ddl, rows)
    tables = []
    for db_id, table_names in (
        ("demo_db", ["singer", "concert", "customer", "orders"]),
        ("library", ["author", "book"]),
    ):
        tables.append({"db_id": db_id, "table_names_original": table_names})
    (root / "tables.json").write_text(json.dumps(tables, indent=2), encoding="utf-8")
    examples = [
        {"db_id": db_id, "question": question, "query": gold}
        for db_id, question, gold in BENCHMARK_ITEMS
    ]
    (root / "examples.json").write_text(json.dumps(examples, indent=2), encoding="utf-8")
    return root


@pytest.fixture(scope="session")
def spider_dir(tmp_path_factory) -> Path:
    return build_spider_dir(tmp_path_factory.mktemp("spider") / "mini")
