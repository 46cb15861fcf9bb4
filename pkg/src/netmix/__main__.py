from netmix.cli import main

raise SystemExit(main())
