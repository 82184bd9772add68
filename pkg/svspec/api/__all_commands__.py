from .commands.spectrum import register as spectrum_command
from .commands.mfun import register as mfun_command
from .commands.check import register as check_command
from .commands.inverse import register as inverse_command
from .commands.scalar import register as scalar_command

all_commands = [
    spectrum_command,
    mfun_command,
    check_command,
    inverse_command,
    scalar_command,
]
