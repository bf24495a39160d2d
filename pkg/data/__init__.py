# Data package - datasets, structures, parameter and report models