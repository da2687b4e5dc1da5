"""CLI subcommands."""

from mros.commands.synth import cmd_synth
from mros.commands.train import cmd_train
from mros.commands.embed import cmd_embed
from mros.commands.evaluate import cmd_eval
from mros.commands.ablate import cmd_ablate

__all__ = [
    'cmd_synth',
    'cmd_train',
    'cmd_embed',
    'cmd_eval',
    'cmd_ablate',
]
