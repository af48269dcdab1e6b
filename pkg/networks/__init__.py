from networks.blocks import SDCAB, DilatedConcatLayer, RainResidualBlock, SEGate
from networks.detail_repair import DetailRepairNetwork
from networks.model import BranchOutputs, SemiDRDNet, count_parameters
from networks.rain_residual import RainResidualNetwork, derain_preliminary
from networks.receptive_field import impulse_footprint, receptive_field
