from src.cli.commands import cli

if __name__ == '__main__':
    # Subcommands: shape, voxelize, search, train, reconstruct, eval, export, pipeline
    cli()
