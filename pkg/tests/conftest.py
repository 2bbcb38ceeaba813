"""
Shared fixtures: the shipped hiring model and a few small hand-written models.
"""
import random

import pytest

from backend.config import CATALOGS_DIR, DEFAULT_SEED, MODELS_DIR, PROPERTIES_DIR
from dab.model import DabModel
from dab.oracle import CatalogInstance
from dab.parser import parse_facts, parse_model, parse_property


# Two sequential tasks; the first picks a user from the catalog.
REQUEST_MODEL = """
sorts {
  id userID;
  case reqId;
  value Label = {low, high};
}

catalog {
  User(Uid: userID, Level: Label);
}

casevars {
  applicant : userID;
  approved : Bool;
  self : reqId;
}

updates {
  PickUser {
    pre GetUser(u) <- User(u, l);
    eff set applicant = u;
  }
  Approve {
    pre Decide(d: Bool) <- d in {true, false};
    eff set approved = d;
  }
}

process Request [start=none] {
  sequence Flow {
    task Pick [update=PickUser]
    task Decide [update=Approve]
  }
}
"""


# Tickets are filed into a repository relation and closed one at a time.
TICKET_MODEL = """
sorts {
  id userID;
  case deskId;
  value Status = {open, closed};
}

catalog {
  User(Uid: userID);
}

repository {
  Ticket(Owner: userID, State: Status) key(Owner);
}

casevars {
  owner : userID;
  self : deskId;
}

updates {
  File {
    pre GetUser(u) <- User(u);
    eff insert (u, open) into Ticket;
  }
  Close {
    pre Pick(u) <- Ticket(u, s) and s = open;
    eff delete (u, s) from Ticket set owner = u;
  }
}

process Desk [start=none] {
  sequence Work {
    task FileTicket [update=File]
    task CloseTicket [update=Close]
  }
}
"""


def read(path) -> str:
    return path.read_text(encoding="utf-8")


def pytest_addoption(parser):
    parser.addoption("--seed", action="store", type=int, default=DEFAULT_SEED,
                     help="Seed for the randomised suites")


@pytest.fixture(scope="session")
def seed(request) -> int:
    return request.config.getoption("--seed")


@pytest.fixture
def rng(seed) -> random.Random:
    return random.Random(seed)


@pytest.fixture(scope="session")
def hiring() -> DabModel:
    return parse_model(read(MODELS_DIR / "hiring.dab"))


@pytest.fixture(scope="session")
def hiring_catalog(hiring) -> CatalogInstance:
    return CatalogInstance.from_facts(parse_facts(read(CATALOGS_DIR / "hiring.cat")), hiring.data)


@pytest.fixture
def hiring_property(hiring):
    def load(name: str):
        return parse_property(read(PROPERTIES_DIR / f"{name}.prop"), hiring)
    return load


@pytest.fixture(scope="session")
def request_model() -> DabModel:
    return parse_model(REQUEST_MODEL)


@pytest.fixture(scope="session")
def ticket_model() -> DabModel:
    return parse_model(TICKET_MODEL)
