from . import common
from . import config
from . import scenario
from . import channel
from . import metrics
from . import optimizer
from . import oracle
from . import schemes
from . import harness
