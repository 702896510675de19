from abc import ABC
from typing import TYPE_CHECKING
import unittest

import wdnse.network
import wdnse.tests.util.paths as WDN_PATHS
from wdnse.state import load_measurements

if TYPE_CHECKING:
    from wdnse.network import Network
    from wdnse.state import MeasurementSet


class WdnseBaseTestClass(unittest.TestCase, ABC):
    NAME = ""
    net: "Network"

    def setUp(self) -> None:
        if self.NAME == "":
            raise ValueError("Inheritors must define NAME")
        network_path = WDN_PATHS.networks() / (self.NAME + ".inp")
        self.net = wdnse.network.from_path(network_path)

    def measurements(self, name: str) -> "MeasurementSet":
        return load_measurements(WDN_PATHS.measurements() / (name + ".json"),
                                 self.net)
