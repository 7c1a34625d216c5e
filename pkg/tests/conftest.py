from tests.fixtures.artifact_fixtures import *
from tests.fixtures.physics_fixtures import *


fixtures = PHYSICS, ARTIFACTS
